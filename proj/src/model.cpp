#include "marc/model.hpp"

#include "marc/dataio.hpp"
#include "marc/error.hpp"
#include "marc/numcore/ops.hpp"

#include <algorithm>

namespace marc {

MarcModel MarcModel::create(const RunConfig& cfg, Index input_dim) {
    cfg.validate();
    MarcModel m;
    m.config = cfg;
    const Rng root(cfg.seed);

    EncoderConfig enc;
    enc.input_dim = input_dim;
    enc.hidden_dim = cfg.hidden_dim;
    enc.num_layers = cfg.num_layers;
    enc.mode = cfg.backbone;
    Rng backbone_rng = root.split(streams::kBackbone);
    m.backbone = EncoderStack(enc, backbone_rng);
    const Index d_o = m.backbone.output_dim();

    Rng comp_rng = root.split(streams::kCompression);
    Rng match_rng = root.split(streams::kMatching);
    switch (cfg.method) {
        case Method::marc:
            m.compression = CompressionNet(d_o, cfg.d_c, comp_rng, cfg.compression_hidden);
            if (!cfg.no_mn && cfg.proxy == ProxyOverride::none) {
                m.matching = MatchingNet(cfg.d_c, !cfg.no_ei, match_rng, cfg.matching_hidden);
            }
            break;
        case Method::mrl: {
            m.compression = CompressionNet(d_o, cfg.d_c, comp_rng, cfg.compression_hidden);
            Rng heads_rng = root.split(streams::kHeads);
            m.heads = NestedHeads(NestedHeads::prefixes_for(cfg.d_c), cfg.d_c, heads_rng,
                                  cfg.matching_hidden);
            break;
        }
        case Method::ae: {
            m.compression = CompressionNet(d_o, cfg.d_c, comp_rng, cfg.compression_hidden);
            std::vector<Index> mirrored(cfg.compression_hidden.rbegin(), cfg.compression_hidden.rend());
            Rng dec_rng = root.split(streams::kDecoder);
            m.decoder = Mlp(cfg.d_c, mirrored, d_o, dec_rng, "decoder");
            break;
        }
        case Method::pca:
            if (cfg.d_c >= d_o) {
                throw InvalidArgument("d_c: must be smaller than the representation width " +
                                      std::to_string(d_o));
            }
            break;
        case Method::cs:
        case Method::cl:
            break;
    }
    return m;
}

std::vector<Tensor> MarcModel::trainable_parameters() const {
    std::vector<Tensor> out;
    auto append = [&](const std::vector<Tensor>& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    const bool backbone_trained = config.method != Method::ae && config.method != Method::pca;
    if (backbone_trained) append(backbone.parameters());
    if (compression) append(compression->parameters());
    if (matching) append(matching->parameters());
    if (heads) append(heads->parameters());
    if (decoder) append(decoder->parameters());
    return out;
}

std::vector<std::pair<std::string, Tensor>> MarcModel::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto append = [&](const std::vector<Tensor>& ps) {
        for (const auto& p : ps) out.emplace_back(p.name(), p);
    };
    append(backbone.parameters());
    if (compression) append(compression->parameters());
    if (matching) append(matching->parameters());
    if (heads) append(heads->parameters());
    if (decoder) append(decoder->parameters());
    if (pca) {
        out.emplace_back("pca.mean", Tensor(Matrix(pca->mean)));
        out.emplace_back("pca.components", Tensor(pca->components));
        out.emplace_back("pca.eigenvalues", Tensor(Matrix(pca->eigenvalues.transpose())));
        out.emplace_back("pca.discarded", Tensor(Matrix(pca->discarded_eigenvalues.transpose())));
    }
    return out;
}

bool MarcModel::has_compressor() const { return compression.has_value() || pca.has_value(); }

Index MarcModel::compressed_dim() const {
    if (compression) return compression->output_dim();
    if (pca) return pca->output_dim();
    if (config.method == Method::pca) return config.d_c;
    return original_dim();
}

Tensor MarcModel::compress_representation(const Tensor& r) const {
    if (compression) return compress(r, *compression);
    if (pca) return Tensor(pca_transform(r.value(), *pca));
    if (config.method == Method::pca) throw Error("pca model has not been fitted");
    return r;
}

void MarcModel::freeze() {
    for (auto& [name, t] : named_tensors()) {
        (void)name;
        round_to_float(t.mutable_value());
    }
    if (pca) {
        Matrix mean = pca->mean;
        round_to_float(mean);
        pca->mean = mean;
        round_to_float(pca->components);
        Matrix ev = pca->eigenvalues;
        round_to_float(ev);
        pca->eigenvalues = ev;
        Matrix dv = pca->discarded_eigenvalues;
        round_to_float(dv);
        pca->discarded_eigenvalues = dv;
    }
    trained = true;
}

namespace {

Tensor select_rows(const Tensor& x, const std::vector<Index>& rows) {
    return ops::gather_rows(x, rows);
}

}  // namespace

LossParts method_loss(const MarcModel& model, const Tensor& r_user, const Tensor& r_item,
                      std::span<const double> labels) {
    const RunConfig& cfg = model.config;
    LossParts parts;
    switch (cfg.method) {
        case Method::marc: {
            Tensor c_user = compress(r_user, *model.compression);
            Tensor c_item = compress(r_item, *model.compression);
            Tensor match;
            if (cfg.no_mn) {
                match = cosine_match_loss(c_user, c_item, labels);
            } else if (cfg.proxy == ProxyOverride::cosine) {
                match = cs_proxy_loss(c_user, c_item, labels);
            } else {
                match = match_loss(predict_match(c_user, c_item, *model.matching), labels);
            }
            parts.match = match.item();
            parts.total = match;
            if (!cfg.no_hsic && cfg.alpha > 0.0) {
                Tensor l_hsic = hsic_loss(r_user, c_user, r_item, c_item, cfg.kernel_config());
                parts.hsic = l_hsic.item();
                parts.total = ops::add(match, ops::scale(l_hsic, cfg.alpha));
            }
            break;
        }
        case Method::cs:
            parts.total = cs_proxy_loss(r_user, r_item, labels);
            parts.match = parts.total.item();
            break;
        case Method::cl: {
            std::vector<Index> pos;
            for (std::size_t r = 0; r < labels.size(); ++r)
                if (labels[r] == 1.0) pos.push_back(static_cast<Index>(r));
            if (pos.size() < 2) {
                parts.total = Tensor::scalar(0.0);
                parts.defined = false;
                break;
            }
            parts.total = cl_proxy_loss(select_rows(r_user, pos), select_rows(r_item, pos),
                                        cfg.cl_temperature);
            parts.match = parts.total.item();
            break;
        }
        case Method::mrl:
            parts.total = mrl_loss(compress(r_user, *model.compression),
                                   compress(r_item, *model.compression), labels, *model.heads);
            parts.match = parts.total.item();
            break;
        case Method::ae: {
            std::vector<Tensor> both{r_user, r_item};
            parts.total = ae_loss(ops::concat_rows(both), model.compression->mlp(), *model.decoder);
            parts.match = parts.total.item();
            break;
        }
        case Method::pca: {
            if (!model.pca) throw Error("pca model has not been fitted");
            Matrix both(r_user.rows() + r_item.rows(), r_user.cols());
            both << r_user.value(), r_item.value();
            parts.total = Tensor::scalar(pca_reconstruction_error(both, *model.pca));
            parts.match = parts.total.item();
            break;
        }
    }
    return parts;
}

LossParts total_loss(const Batch& batch, const MarcModel& model) {
    if (batch.user_inputs.rows() != static_cast<Index>(batch.labels.size()) ||
        batch.item_inputs.rows() != static_cast<Index>(batch.labels.size())) {
        throw ShapeError("total_loss: batch rows and label count differ");
    }
    return method_loss(model, model.backbone.encode(batch.user_inputs),
                       model.backbone.encode(batch.item_inputs), batch.labels);
}

}  // namespace marc
