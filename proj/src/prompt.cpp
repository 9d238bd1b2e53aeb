#include "htgl/prompt.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "htgl/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace htgl {

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json embedding_to_json(const TypeEmbedding& e) {
    return json{{"dim", e.values.size()},
                {"values", e.values},
                {"provider", e.provider},
                {"prompt_hash", e.prompt_hash}};
}

TypeEmbedding embedding_from_json(const std::string& type_name, const json& j,
                                  const std::string& where) {
    TypeEmbedding e;
    e.type_name = type_name;
    try {
        e.values = j.at("values").get<std::vector<double>>();
        e.provider = j.value("provider", std::string{"file"});
        e.prompt_hash = j.value("prompt_hash", std::string{});
        const auto dim = j.at("dim").get<std::size_t>();
        if (dim != e.values.size()) {
            throw std::invalid_argument("declared dim " + std::to_string(dim) +
                                        " does not match " + std::to_string(e.values.size()) +
                                        " values");
        }
    } catch (const json::exception& ex) {
        throw std::invalid_argument(where + ": entry for type '" + type_name + "': " + ex.what());
    }
    for (double v : e.values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(where + ": non-finite embedding value for type '" +
                                        type_name + "'");
        }
    }
    return e;
}

// splits "http://host:port/path" into client base and path
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("embedding endpoint '" + url + "' is not a full URL");
    }
    if (url.compare(0, scheme_end, "http") != 0) {
        throw std::invalid_argument("embedding endpoint '" + url +
                                    "': only plain http is supported in this build");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

TypePrompt build_prompt(const NodeTypeMeta& meta) {
    std::string intro = meta.description;
    if (intro.empty()) {
        intro = "Nodes of type " + meta.name + " in a heterogeneous temporal graph.";
    }
    TypePrompt p;
    p.type_name = meta.name;
    p.text = "Node type: " + meta.name + "\nIntroduction: " + intro + "\n" + kPromptInstruction;
    return p;
}

std::string prompt_hash(const TypePrompt& prompt) { return hex64(rng::fnv1a64(prompt.text)); }

EmbeddingProvider::EmbeddingProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.kind != "file" && cfg_.kind != "remote" && cfg_.kind != "fallback") {
        throw std::invalid_argument("unknown embedding provider kind '" + cfg_.kind + "'");
    }
    if (cfg_.kind == "file" && cfg_.path.empty()) {
        throw std::invalid_argument("file embedding provider needs a table path");
    }
    if (cfg_.kind == "remote" && cfg_.endpoint.empty()) {
        throw std::invalid_argument("remote embedding provider needs an endpoint URL");
    }
    if (cfg_.kind == "fallback" && cfg_.dim == 0) {
        throw std::invalid_argument("fallback embedding provider needs dim >= 1");
    }
}

TypeEmbedding EmbeddingProvider::get(const TypePrompt& prompt) {
    const std::string hash = prompt_hash(prompt);
    fs::path cache_file;
    if (!cfg_.cache_dir.empty()) {
        cache_file = fs::path(cfg_.cache_dir) / (hash + ".json");
        std::ifstream in(cache_file, std::ios::binary);
        if (in) {
            json j;
            try {
                in >> j;
                TypeEmbedding e = embedding_from_json(prompt.type_name, j, cache_file.string());
                if (e.prompt_hash == hash) return e;
            } catch (const std::exception&) {
                // unreadable cache entry: fall through and refetch
            }
        }
    }

    TypeEmbedding e = fetch(prompt);
    e.prompt_hash = hash;
    ++fetches_;

    if (!cache_file.empty()) {
        fs::create_directories(cache_file.parent_path());
        const fs::path tmp = cache_file.string() + ".tmp." + std::to_string(::getpid());
        {
            std::ofstream out(tmp, std::ios::binary);
            out << embedding_to_json(e).dump() << "\n";
            if (!out) throw std::runtime_error("cannot write embedding cache " + tmp.string());
        }
        fs::rename(tmp, cache_file);
    }
    return e;
}

TypeEmbedding EmbeddingProvider::fetch(const TypePrompt& prompt) {
    TypeEmbedding e;
    e.type_name = prompt.type_name;

    if (cfg_.kind == "fallback") {
        // Fully specified offline pseudo-embedding: FNV-1a of the prompt bytes
        // (mixed with the provider seed) seeds splitmix64; Box-Muller Gaussians,
        // normalized to unit length. Identical on every platform.
        rng::SplitMix64 gen{rng::fnv1a64(prompt.text) ^ cfg_.seed};
        e.values.resize(cfg_.dim);
        double norm2 = 0.0;
        for (auto& v : e.values) {
            v = rng::gaussian(gen);
            norm2 += v * v;
        }
        if (norm2 <= 0.0) {
            throw std::runtime_error("degenerate fallback embedding for type '" +
                                     prompt.type_name + "'");
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& v : e.values) v *= inv;
        e.provider = "fallback";
        return e;
    }

    if (cfg_.kind == "file") {
        auto table = load_embedding_table(cfg_.path);
        auto it = table.find(prompt.type_name);
        if (it == table.end()) {
            throw std::invalid_argument("embedding table " + cfg_.path +
                                        " has no entry for type '" + prompt.type_name + "'");
        }
        e = it->second;
        e.provider = "file";
        return e;
    }

    // remote
    auto [base, path] = split_url(cfg_.endpoint);
    httplib::Client client(base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(30, 0);
    httplib::Headers headers;
    if (!cfg_.auth_env.empty()) {
        const char* token = std::getenv(cfg_.auth_env.c_str());
        if (token == nullptr || *token == '\0') {
            throw std::runtime_error("auth env var '" + cfg_.auth_env + "' is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const json req{{"model", cfg_.model}, {"input", json::array({prompt.text})}};
    auto res = client.Post(path, headers, req.dump(), "application/json");
    if (!res) {
        throw std::runtime_error("embedding request to " + cfg_.endpoint + " failed: " +
                                 httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw std::runtime_error("embedding request to " + cfg_.endpoint +
                                 " returned status " + std::to_string(res->status));
    }
    json body;
    try {
        body = json::parse(res->body);
        e.values = body.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& ex) {
        throw std::runtime_error("embedding response from " + cfg_.endpoint +
                                 " is malformed: " + ex.what());
    }
    if (e.values.empty()) {
        throw std::runtime_error("embedding response from " + cfg_.endpoint + " is empty");
    }
    e.provider = "remote";
    return e;
}

std::map<std::string, TypeEmbedding> embed_dataset(const HTGraph& g, EmbeddingProvider& provider) {
    std::map<std::string, TypeEmbedding> table;
    std::size_t dim = 0;
    for (const auto& nt : g.node_types) {
        TypeEmbedding e;
        try {
            e = provider.get(build_prompt(nt));
        } catch (const std::exception& ex) {
            throw std::runtime_error("embedding type '" + nt.name + "': " + ex.what());
        }
        if (dim == 0) {
            dim = e.values.size();
        } else if (e.values.size() != dim) {
            throw std::invalid_argument("embedding dimension mismatch: type '" + nt.name +
                                        "' has " + std::to_string(e.values.size()) +
                                        ", previous types have " + std::to_string(dim));
        }
        table.emplace(nt.name, std::move(e));
    }
    return table;
}

void write_embedding_table(const std::map<std::string, TypeEmbedding>& table,
                           const std::string& path) {
    json j = json::object();
    for (const auto& [name, e] : table) j[name] = embedding_to_json(e);
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write embedding table " + path);
}

std::map<std::string, TypeEmbedding> load_embedding_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open embedding table " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw std::invalid_argument("embedding table " + path + ": " + ex.what());
    }
    std::map<std::string, TypeEmbedding> table;
    for (const auto& [name, entry] : j.items()) {
        table.emplace(name, embedding_from_json(name, entry, path));
    }
    return table;
}

InitCoefficients init_attention(Tape& tape, const HTGraph& g,
                                const std::map<std::string, TypeEmbedding>& embeddings,
                                const Tensor& WQ, const Tensor& WK) {
    if (WQ.shape().size() != 2 || WQ.shape() != WK.shape()) {
        throw std::invalid_argument("similarity projections must share shape, got " +
                                    shape_str(WQ.shape()) + " and " + shape_str(WK.shape()));
    }
    const std::size_t d_llm = WQ.rows();
    auto embedding_row = [&](const std::string& type) {
        auto it = embeddings.find(type);
        if (it == embeddings.end()) {
            throw std::invalid_argument("no embedding for type '" + type + "'");
        }
        if (it->second.values.size() != d_llm) {
            throw std::invalid_argument("embedding for type '" + type + "' has dimension " +
                                        std::to_string(it->second.values.size()) +
                                        ", projections expect " + std::to_string(d_llm));
        }
        return Tensor::from({1, d_llm}, it->second.values);
    };

    InitCoefficients init;
    init.e0.reserve(g.node_types.size());
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        const auto rels = g.relations_into(v);
        if (rels.empty()) {
            throw std::invalid_argument("type '" + g.node_types[v].name +
                                        "' has no inbound relations; add the self relation first");
        }
        Tensor key = tape.matmul(embedding_row(g.node_types[v].name), WK);
        std::vector<Tensor> sims;
        sims.reserve(rels.size());
        for (std::size_t r : rels) {
            Tensor query = tape.matmul(embedding_row(g.relation_types[r].src_type), WQ);
            sims.push_back(tape.sum_all(tape.mul(query, key)));
        }
        init.e0.push_back(tape.softmax(tape.stack_scalars(sims)));
    }
    return init;
}

}  // namespace htgl
