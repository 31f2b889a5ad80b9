#pragma once

#include "marc/config.hpp"
#include "marc/model.hpp"
#include "marc/numcore/tensor.hpp"
#include "marc/rng.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace marc::testing {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

inline Tensor random_param(Index rows, Index cols, Rng& rng, double scale = 1.0) {
    return Tensor(random_matrix(rows, cols, rng, scale), true);
}

/// Small model dimensions for gradient checks; fixed sigma so the
/// kernel bandwidth does not move under finite differences.
inline RunConfig tiny_run_config(Method method, std::uint64_t seed) {
    RunConfig cfg;
    cfg.method = method;
    cfg.seed = seed;
    cfg.hidden_dim = 8;
    cfg.num_layers = 2;
    cfg.d_c = 4;
    cfg.compression_hidden = {6};
    cfg.matching_hidden = {5};
    cfg.sigma_policy = SigmaPolicy::fixed;
    cfg.sigma = 1.5;
    return cfg;
}

/// Random inputs with labels alternating 1, 0, 1, ...
inline Batch random_batch(Index rows, Index input_dim, Rng& rng) {
    Batch b;
    b.user_inputs = Tensor(random_matrix(rows, input_dim, rng));
    b.item_inputs = Tensor(random_matrix(rows, input_dim, rng));
    for (Index i = 0; i < rows; ++i) b.labels.push_back(i % 2 == 0 ? 1.0 : 0.0);
    return b;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("marc_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace marc::testing
