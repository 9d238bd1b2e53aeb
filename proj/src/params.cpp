#include "htgl/params.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "htgl/rng.hpp"

namespace htgl {

void ModelConfig::validate() const {
    if (dim == 0 || heads == 0 || layers == 0 || window == 0 || horizon == 0 || llm_dim == 0) {
        throw std::invalid_argument("model config: all extents must be positive");
    }
}

ModelParams::ModelParams(std::uint64_t seed) : gen_(seed) {}

Tensor ModelParams::add(const std::string& name, std::vector<std::size_t> shape,
                        std::size_t fan_in) {
    if (index_.count(name)) {
        throw std::invalid_argument("parameter '" + name + "' registered twice");
    }
    if (fan_in == 0) {
        throw std::invalid_argument("parameter '" + name + "': zero fan-in");
    }
    Tensor t = Tensor::zeros(std::move(shape), true);
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (double& v : t.value()) v = (2.0 * rng::unit(gen_) - 1.0) * bound;
    index_[name] = entries_.size();
    entries_.emplace_back(name, t);
    return t;
}

Tensor ModelParams::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) {
        throw std::invalid_argument("parameter '" + name + "' registered twice");
    }
    Tensor t = Tensor::zeros(std::move(shape), true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, t);
    return t;
}

bool ModelParams::has(const std::string& name) const { return index_.count(name) != 0; }

Tensor ModelParams::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::invalid_argument("unknown parameter '" + name + "'");
    }
    return entries_[it->second].second;
}

std::size_t ModelParams::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

GruParams ModelParams::gru(std::size_t layer, const std::string& relation) const {
    const std::string base = "gru." + std::to_string(layer) + "." + relation + ".";
    return GruParams{at(base + "Wz"), at(base + "Uz"), at(base + "bz"),
                     at(base + "Wr"), at(base + "Ur"), at(base + "br"),
                     at(base + "Wh"), at(base + "Uh"), at(base + "bh")};
}

namespace {

constexpr char kMagic[4] = {'H', 'T', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint '" + path + "' truncated");
    return v;
}

}  // namespace

void ModelParams::save(const std::string& path) const {
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
        out.write(kMagic, 4);
        put(out, kVersion);
        put(out, std::uint64_t(entries_.size()));
        for (const auto& [name, t] : entries_) {
            put(out, std::uint64_t(name.size()));
            out.write(name.data(), std::streamsize(name.size()));
            put(out, std::uint32_t(t.shape().size()));
            for (std::size_t d : t.shape()) put(out, std::uint64_t(d));
            out.write(reinterpret_cast<const char*>(t.value().data()),
                      std::streamsize(t.size() * sizeof(double)));
        }
        if (!out) throw std::runtime_error("short write to checkpoint '" + path + "'");
    }
    std::filesystem::rename(tmp, path);
}

void ModelParams::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw std::runtime_error("checkpoint '" + path + "': bad magic");
    }
    const auto version = take<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint '" + path + "': unsupported version " +
                                 std::to_string(version));
    }
    const auto count = take<std::uint64_t>(in, path);
    if (count != entries_.size()) {
        throw std::runtime_error("checkpoint '" + path + "' holds " + std::to_string(count) +
                                 " tensors, model has " + std::to_string(entries_.size()));
    }
    std::map<std::string, bool> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = take<std::uint64_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), std::streamsize(name_len));
        if (!in) throw std::runtime_error("checkpoint '" + path + "' truncated");
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::runtime_error("checkpoint '" + path + "': unknown tensor '" + name + "'");
        }
        if (seen[name]) {
            throw std::runtime_error("checkpoint '" + path + "': duplicate tensor '" + name + "'");
        }
        seen[name] = true;
        Tensor t = entries_[it->second].second;
        const auto ndim = take<std::uint32_t>(in, path);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = std::size_t(take<std::uint64_t>(in, path));
        if (shape != t.shape()) {
            throw std::runtime_error("checkpoint '" + path + "': tensor '" + name + "' has shape " +
                                     shape_str(shape) + ", model expects " + shape_str(t.shape()));
        }
        in.read(reinterpret_cast<char*>(t.value().data()),
                std::streamsize(t.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint '" + path + "' truncated");
        for (double v : t.value()) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("checkpoint '" + path + "': tensor '" + name +
                                         "' holds a non-finite value");
            }
        }
    }
}

ModelParams default_params(const HTGraph& g, const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.dim, k = cfg.heads;
    ModelParams p(seed);
    for (const auto& nt : g.node_types) {
        p.add("proj." + nt.name + ".W", {nt.feature_dim, d}, nt.feature_dim);
        p.add("proj." + nt.name + ".b", {d}, nt.feature_dim);
    }
    for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
        for (const auto& rt : g.relation_types) {
            const std::string base = "gru." + std::to_string(layer) + "." + rt.name + ".";
            for (const char* gate : {"z", "r", "h"}) {
                p.add(base + "W" + gate, {d, k}, d);
                p.add(base + "U" + gate, {k, k}, k);
                p.add(base + "b" + gate, {k}, d);
            }
        }
    }
    p.add("llm.WQ", {cfg.llm_dim, cfg.sim_width()}, cfg.llm_dim);
    p.add("llm.WK", {cfg.llm_dim, cfg.sim_width()}, cfg.llm_dim);
    p.add("temporal.W", {cfg.window, cfg.horizon}, cfg.window);
    p.add("temporal.b", {cfg.horizon}, cfg.window);
    p.add("head.1.W", {d, d}, d);
    p.add("head.1.b", {d}, d);
    p.add("head.2.W", {d, cfg.head_width()}, d);
    p.add("head.2.b", {cfg.head_width()}, d);
    return p;
}

}  // namespace htgl
