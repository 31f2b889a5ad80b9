#pragma once

#include "marc/backbone.hpp"
#include "marc/compression.hpp"
#include "marc/matching.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace marc {

enum class Method { marc, cs, cl, mrl, ae, pca };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

enum class EarlyStopping { validation, train };

std::string to_string(EarlyStopping e);
EarlyStopping early_stopping_from_string(const std::string& s);

/// Downstream CTR probe settings.
///
/// With `validation` early stopping a fraction of the train users is held
/// out, training stops once their loss has not improved by more than
/// `min_improvement` for `patience` epochs, and the best epoch is restored.
/// `train` applies the same rule to the training loss.
struct ProbeConfig {
    Index id_dim = 32;
    Index experts = 3;
    std::vector<Index> expert_layout{128, 32};   // hidden..., output
    std::vector<Index> output_hidden{200, 80};
    double lr = 1e-3;
    Index batch_size = 256;
    int max_epochs = 30;
    EarlyStopping early_stopping = EarlyStopping::validation;
    double validation_fraction = 0.1;
    int patience = 1;
    double min_improvement = 1e-4;
    bool use_representations = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Everything needed to build and train one method.
///
/// JSON keys are flat; see README for the list. Unknown keys are rejected.
struct RunConfig {
    Method method = Method::marc;
    // MARC ablations
    bool no_hsic = false;
    bool no_ei = false;
    bool no_mn = false;
    ProxyOverride proxy = ProxyOverride::none;

    Index d_c = 32;
    double alpha = 0.01;
    SigmaPolicy sigma_policy = SigmaPolicy::median;
    double sigma = 1.0;
    std::vector<Index> compression_hidden{256, 128};
    std::vector<Index> matching_hidden{128};
    double cl_temperature = 0.07;

    BackboneMode backbone = BackboneMode::trainable;
    Index num_layers = 6;
    Index hidden_dim = 64;

    Index batch_size = 256;
    double lr = 1e-3;
    int epochs = 8;
    Index train_samples = 20000;
    std::uint64_t seed = 0;

    ProbeConfig probe;

    void validate() const;
    MarcLossConfig loss_config() const;
    KernelConfig kernel_config() const;

    /// Method identifier used in reports, e.g. "marc", "marc-no_hsic", "cs".
    std::string method_id() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Applies the keys of `j` on top of `base`; throws InvalidArgument naming
/// the offending field on unknown keys or bad values.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

nlohmann::json to_json(const ProbeConfig& cfg);
ProbeConfig probe_config_from_json(const nlohmann::json& j, ProbeConfig base = {});

}  // namespace marc
