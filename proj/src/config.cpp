#include "marc/config.hpp"

#include "marc/error.hpp"

#include <set>

namespace marc {

using nlohmann::json;

std::string to_string(Method m) {
    switch (m) {
        case Method::marc: return "marc";
        case Method::cs: return "cs";
        case Method::cl: return "cl";
        case Method::mrl: return "mrl";
        case Method::ae: return "ae";
        case Method::pca: return "pca";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (Method m : {Method::marc, Method::cs, Method::cl, Method::mrl, Method::ae, Method::pca}) {
        if (to_string(m) == s) return m;
    }
    throw InvalidArgument("method: unknown value '" + s + "'");
}

std::string to_string(EarlyStopping e) { return e == EarlyStopping::validation ? "validation" : "train"; }

EarlyStopping early_stopping_from_string(const std::string& s) {
    if (s == "validation") return EarlyStopping::validation;
    if (s == "train") return EarlyStopping::train;
    throw InvalidArgument("probe.early_stopping: unknown value '" + s + "'");
}

void ProbeConfig::validate() const {
    if (id_dim < 1) throw InvalidArgument("probe.id_dim: must be >= 1");
    if (experts < 1) throw InvalidArgument("probe.experts: must be >= 1");
    if (expert_layout.empty()) throw InvalidArgument("probe.expert_layout: must not be empty");
    if (!(lr > 0.0)) throw InvalidArgument("probe.lr: must be positive");
    if (batch_size < 2) throw InvalidArgument("probe.batch_size: must be >= 2");
    if (max_epochs < 1) throw InvalidArgument("probe.max_epochs: must be >= 1");
    if (patience < 1) throw InvalidArgument("probe.patience: must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw InvalidArgument("probe.validation_fraction: must be in (0, 1)");
    }
}

void RunConfig::validate() const {
    const bool ablated = no_hsic || no_ei || no_mn || proxy != ProxyOverride::none;
    if (ablated && method != Method::marc) {
        throw InvalidArgument("no_hsic/no_ei/no_mn/proxy: only valid for method=marc");
    }
    if (d_c < 1) throw InvalidArgument("d_c: must be >= 1");
    if (!(alpha >= 0.0)) throw InvalidArgument("alpha: must be >= 0");
    if (sigma_policy == SigmaPolicy::fixed && !(sigma > 0.0)) {
        throw InvalidArgument("sigma: must be positive for the fixed policy");
    }
    if (!(cl_temperature > 0.0)) throw InvalidArgument("cl_temperature: must be positive");
    if (num_layers < 1) throw InvalidArgument("num_layers: must be >= 1");
    if (hidden_dim < 1) throw InvalidArgument("hidden_dim: must be >= 1");
    if (batch_size < 2) throw InvalidArgument("batch_size: must be >= 2");
    if (!(lr > 0.0)) throw InvalidArgument("lr: must be positive");
    if (epochs < 0) throw InvalidArgument("epochs: must be >= 0");
    if (train_samples < 1) throw InvalidArgument("train_samples: must be >= 1");
    probe.validate();
}

KernelConfig RunConfig::kernel_config() const { return KernelConfig{sigma_policy, sigma}; }

MarcLossConfig RunConfig::loss_config() const {
    MarcLossConfig c;
    c.alpha = alpha;
    c.use_hsic = !no_hsic;
    c.use_explicit_interactions = !no_ei;
    c.use_matching_net = !no_mn;
    c.proxy_override = proxy;
    c.kernel = kernel_config();
    return c;
}

std::string RunConfig::method_id() const {
    std::string id = to_string(method);
    if (no_hsic) id += "-no_hsic";
    if (no_ei) id += "-no_ei";
    if (no_mn) id += "-no_mn";
    if (proxy == ProxyOverride::cosine) id += "-cs_proxy";
    return id;
}

json to_json(const ProbeConfig& c) {
    return json{{"id_dim", c.id_dim},
                {"experts", c.experts},
                {"expert_layout", c.expert_layout},
                {"output_hidden", c.output_hidden},
                {"lr", c.lr},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"early_stopping", to_string(c.early_stopping)},
                {"validation_fraction", c.validation_fraction},
                {"patience", c.patience},
                {"min_improvement", c.min_improvement},
                {"use_representations", c.use_representations},
                {"seed", c.seed}};
}

json to_json(const RunConfig& c) {
    return json{{"method", to_string(c.method)},
                {"no_hsic", c.no_hsic},
                {"no_ei", c.no_ei},
                {"no_mn", c.no_mn},
                {"proxy", to_string(c.proxy)},
                {"d_c", c.d_c},
                {"alpha", c.alpha},
                {"sigma_policy", to_string(c.sigma_policy)},
                {"sigma", c.sigma},
                {"compression_hidden", c.compression_hidden},
                {"matching_hidden", c.matching_hidden},
                {"cl_temperature", c.cl_temperature},
                {"backbone", to_string(c.backbone)},
                {"num_layers", c.num_layers},
                {"hidden_dim", c.hidden_dim},
                {"batch_size", c.batch_size},
                {"lr", c.lr},
                {"epochs", c.epochs},
                {"train_samples", c.train_samples},
                {"seed", c.seed},
                {"probe", to_json(c.probe)}};
}

namespace {

template <typename T>
T field(const json& j, const std::string& key, const std::string& prefix) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(prefix + key + ": wrong type");
    }
}

}  // namespace

ProbeConfig probe_config_from_json(const json& j, ProbeConfig c) {
    if (!j.is_object()) throw InvalidArgument("probe: expected an object");
    static const std::set<std::string> known{"id_dim",     "experts",   "expert_layout",
                                             "output_hidden", "lr",     "batch_size",
                                             "max_epochs", "patience",  "min_improvement",
                                             "early_stopping", "validation_fraction",
                                             "use_representations", "seed"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw InvalidArgument("probe." + k + ": unknown field");
    }
    const std::string p = "probe.";
    if (j.contains("id_dim")) c.id_dim = field<Index>(j, "id_dim", p);
    if (j.contains("experts")) c.experts = field<Index>(j, "experts", p);
    if (j.contains("expert_layout")) c.expert_layout = field<std::vector<Index>>(j, "expert_layout", p);
    if (j.contains("output_hidden")) c.output_hidden = field<std::vector<Index>>(j, "output_hidden", p);
    if (j.contains("lr")) c.lr = field<double>(j, "lr", p);
    if (j.contains("batch_size")) c.batch_size = field<Index>(j, "batch_size", p);
    if (j.contains("max_epochs")) c.max_epochs = field<int>(j, "max_epochs", p);
    if (j.contains("early_stopping"))
        c.early_stopping = early_stopping_from_string(field<std::string>(j, "early_stopping", p));
    if (j.contains("validation_fraction"))
        c.validation_fraction = field<double>(j, "validation_fraction", p);
    if (j.contains("patience")) c.patience = field<int>(j, "patience", p);
    if (j.contains("min_improvement")) c.min_improvement = field<double>(j, "min_improvement", p);
    if (j.contains("use_representations"))
        c.use_representations = field<bool>(j, "use_representations", p);
    if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed", p);
    c.validate();
    return c;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
    static const std::set<std::string> known{
        "method",        "no_hsic",   "no_ei",          "no_mn",      "proxy",
        "d_c",           "alpha",     "sigma_policy",   "sigma",      "compression_hidden",
        "matching_hidden", "cl_temperature", "backbone", "num_layers", "hidden_dim",
        "batch_size",    "lr",        "epochs",         "train_samples", "seed",
        "probe",         "schema_version"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw InvalidArgument(k + ": unknown field");
    }
    const std::string p;
    try {
        if (j.contains("method")) c.method = method_from_string(field<std::string>(j, "method", p));
        if (j.contains("no_hsic")) c.no_hsic = field<bool>(j, "no_hsic", p);
        if (j.contains("no_ei")) c.no_ei = field<bool>(j, "no_ei", p);
        if (j.contains("no_mn")) c.no_mn = field<bool>(j, "no_mn", p);
        if (j.contains("proxy")) c.proxy = proxy_override_from_string(field<std::string>(j, "proxy", p));
        if (j.contains("d_c")) c.d_c = field<Index>(j, "d_c", p);
        if (j.contains("alpha")) c.alpha = field<double>(j, "alpha", p);
        if (j.contains("sigma_policy"))
            c.sigma_policy = sigma_policy_from_string(field<std::string>(j, "sigma_policy", p));
        if (j.contains("sigma")) c.sigma = field<double>(j, "sigma", p);
        if (j.contains("compression_hidden"))
            c.compression_hidden = field<std::vector<Index>>(j, "compression_hidden", p);
        if (j.contains("matching_hidden"))
            c.matching_hidden = field<std::vector<Index>>(j, "matching_hidden", p);
        if (j.contains("cl_temperature")) c.cl_temperature = field<double>(j, "cl_temperature", p);
        if (j.contains("backbone"))
            c.backbone = backbone_mode_from_string(field<std::string>(j, "backbone", p));
        if (j.contains("num_layers")) c.num_layers = field<Index>(j, "num_layers", p);
        if (j.contains("hidden_dim")) c.hidden_dim = field<Index>(j, "hidden_dim", p);
        if (j.contains("batch_size")) c.batch_size = field<Index>(j, "batch_size", p);
        if (j.contains("lr")) c.lr = field<double>(j, "lr", p);
        if (j.contains("epochs")) c.epochs = field<int>(j, "epochs", p);
        if (j.contains("train_samples")) c.train_samples = field<Index>(j, "train_samples", p);
        if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed", p);
        if (j.contains("probe")) c.probe = probe_config_from_json(j.at("probe"), c.probe);
    } catch (const InvalidArgument&) {
        throw;
    } catch (const Error& e) {
        throw InvalidArgument(e.what());
    }
    c.validate();
    return c;
}

}  // namespace marc
