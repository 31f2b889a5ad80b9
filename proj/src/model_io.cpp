#include "marc/model_io.hpp"

#include "byte_io.hpp"
#include "marc/error.hpp"

#include <bit>
#include <cstring>
#include <map>

namespace marc {

using nlohmann::json;
namespace fs = std::filesystem;

void save_model(const MarcModel& model, const fs::path& path) {
    if (!model.trained) throw InvalidArgument("save_model: model must be trained (frozen) first");
    std::string payload;
    json manifest = json::array();
    for (const auto& [name, t] : model.named_tensors()) {
        manifest.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", payload.size()}});
        const Matrix& v = t.value();
        for (Index k = 0; k < v.size(); ++k) {
            detail::put_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v.data()[k])));
        }
    }
    const json header{{"config", to_json(model.config)},
                      {"input_dim", model.backbone.config().input_dim},
                      {"original_dim", model.original_dim()},
                      {"compressed_dim", model.compressed_dim()},
                      {"payload_bytes", payload.size()},
                      {"tensors", manifest}};
    const std::string text = header.dump();

    std::string out(kModelMagic, sizeof(kModelMagic));
    detail::put_le(out, kModelVersion);
    detail::put_le(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    out += payload;
    detail::write_file(path, out);
}

namespace {

struct RawModel {
    json header;
    std::string bytes;
    std::size_t payload_start = 0;
};

RawModel read_raw(const fs::path& path) {
    RawModel raw;
    raw.bytes = detail::read_file(path);
    const std::string& b = raw.bytes;
    constexpr std::size_t kFixed = sizeof(kModelMagic) + 4 + 8;
    if (b.size() < sizeof(kModelMagic) || std::memcmp(b.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
        throw FormatError(FormatErrc::bad_magic, path.string() + ": bad magic");
    }
    if (b.size() < kFixed) throw FormatError(FormatErrc::truncated, path.string() + ": truncated header");
    const auto version = detail::get_le<std::uint32_t>(b, 8);
    if (version != kModelVersion) {
        throw FormatError(FormatErrc::bad_version, path.string() + ": unsupported model version " +
                                                       std::to_string(version) + " (expected " +
                                                       std::to_string(kModelVersion) + ")");
    }
    const auto header_len = detail::get_le<std::uint64_t>(b, 12);
    if (b.size() - kFixed < header_len) throw FormatError(FormatErrc::truncated, path.string() + ": truncated header");
    try {
        raw.header = json::parse(b.begin() + kFixed, b.begin() + static_cast<std::ptrdiff_t>(kFixed + header_len));
    } catch (const json::exception& e) {
        throw FormatError(FormatErrc::malformed, path.string() + ": header is not valid JSON");
    }
    raw.payload_start = kFixed + header_len;
    return raw;
}

}  // namespace

json read_model_header(const fs::path& path) { return read_raw(path).header; }

MarcModel load_model(const fs::path& path) {
    const RawModel raw = read_raw(path);
    const json& h = raw.header;
    MarcModel model;
    std::map<std::string, Matrix> tensors;
    try {
        const RunConfig cfg = run_config_from_json(h.at("config"));
        model = MarcModel::create(cfg, h.at("input_dim").get<Index>());
        const std::size_t available = raw.bytes.size() - raw.payload_start;
        for (const auto& t : h.at("tensors")) {
            const auto name = t.at("name").get<std::string>();
            const auto rows = t.at("rows").get<Index>();
            const auto cols = t.at("cols").get<Index>();
            const auto offset = t.at("offset").get<std::size_t>();
            const auto count = static_cast<std::size_t>(rows * cols);
            if (offset > available || count * 4 > available - offset) {
                throw FormatError(FormatErrc::truncated, path.string() + ": payload of '" + name + "' is truncated");
            }
            Matrix m(rows, cols);
            for (std::size_t k = 0; k < count; ++k) {
                const auto bits = detail::get_le<std::uint32_t>(raw.bytes, raw.payload_start + offset + 4 * k);
                m.data()[k] = static_cast<double>(std::bit_cast<float>(bits));
            }
            tensors.emplace(name, std::move(m));
        }
    } catch (const json::exception& e) {
        throw FormatError(FormatErrc::malformed, path.string() + ": malformed header: " + e.what());
    }

    auto take = [&](const std::string& name, Index rows, Index cols) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw FormatError(FormatErrc::count_mismatch, path.string() + ": missing tensor '" + name + "'");
        if (it->second.rows() != rows || it->second.cols() != cols) {
            throw FormatError(FormatErrc::count_mismatch, path.string() + ": tensor '" + name + "' has shape " +
                                                              shape_string(it->second) + ", expected " +
                                                              std::to_string(rows) + "x" + std::to_string(cols));
        }
        Matrix m = std::move(it->second);
        tensors.erase(it);
        return m;
    };
    for (auto& [name, t] : model.named_tensors()) t.mutable_value() = take(name, t.rows(), t.cols());
    if (model.config.method == Method::pca) {
        const Index d = model.original_dim();
        const Index k = model.config.d_c;
        PcaModel pca;
        pca.mean = take("pca.mean", 1, d).row(0);
        pca.components = take("pca.components", d, k);
        pca.eigenvalues = take("pca.eigenvalues", 1, k).row(0).transpose();
        pca.discarded_eigenvalues = take("pca.discarded", 1, d - k).row(0).transpose();
        model.pca = std::move(pca);
    }
    if (!tensors.empty()) {
        throw FormatError(FormatErrc::count_mismatch, path.string() + ": unexpected tensor '" + tensors.begin()->first + "'");
    }
    model.trained = true;
    return model;
}

}  // namespace marc
