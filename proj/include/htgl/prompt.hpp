#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "htgl/graph.hpp"
#include "htgl/tensor.hpp"

namespace htgl {

/// The fixed instruction sentence appended to every type prompt.
inline constexpr char kPromptInstruction[] =
    "Instruction: Summarize in one short paragraph what relationships nodes of this type form "
    "over time and which neighboring types influence them most.";

struct TypePrompt {
    std::string type_name;
    std::string text;
};

struct TypeEmbedding {
    std::string type_name;
    std::vector<double> values;
    std::string provider;     // "file", "remote", or "fallback"
    std::string prompt_hash;  // hex FNV-1a of the prompt text
};

struct ProviderConfig {
    std::string kind = "fallback";  // "file" | "remote" | "fallback"
    std::string path;               // file provider: embedding table JSON
    std::string endpoint;           // remote provider: full URL of the embedding endpoint
    std::string model;              // remote provider: model name sent in the request
    std::string auth_env;           // env var holding the bearer token ("" = no auth header)
    std::uint64_t seed = 0;         // fallback: mixed into the prompt hash
    std::size_t dim = 64;           // fallback embedding width
    std::string cache_dir;          // "" disables the disk cache
};

/// Renders the fixed prompt template for one node type. Pure: identical meta
/// yields identical bytes. Empty descriptions get a generic stub.
TypePrompt build_prompt(const NodeTypeMeta& meta);

/// Hex content hash of a prompt's text (the cache key).
std::string prompt_hash(const TypePrompt& prompt);

class EmbeddingProvider {
public:
    explicit EmbeddingProvider(ProviderConfig cfg);

    /// Resolves one embedding, consulting the disk cache first when enabled.
    /// Cache writes are atomic (write to a temp file, then rename).
    TypeEmbedding get(const TypePrompt& prompt);

    /// Number of actual provider fetches so far (cache hits excluded).
    std::size_t fetches() const { return fetches_; }

    const ProviderConfig& config() const { return cfg_; }

private:
    TypeEmbedding fetch(const TypePrompt& prompt);
    ProviderConfig cfg_;
    std::size_t fetches_ = 0;
};

/// Embeds every node type of the graph — exactly one provider resolution per
/// type. All embeddings must agree on dimension.
std::map<std::string, TypeEmbedding> embed_dataset(const HTGraph& g, EmbeddingProvider& provider);

/// Embedding table file: JSON {type: {dim, values, provider, prompt_hash}}.
void write_embedding_table(const std::map<std::string, TypeEmbedding>& table,
                           const std::string& path);
std::map<std::string, TypeEmbedding> load_embedding_table(const std::string& path);

/// Initial attention coefficients, one probability vector per node type over
/// its inbound relations (parallel to graph.relations_into(v)).
struct InitCoefficients {
    // e0[v] is 1-D of length |R(v)|; on-tape so gradients reach W_Q / W_K.
    std::vector<Tensor> e0;
};

/// Similarity-seeded initial coefficients: for each relation u -> v,
/// sim = (W_Q h_u) . (W_K h_v), then softmax over R(v). Differentiable in
/// W_Q and W_K through the tape.
InitCoefficients init_attention(Tape& tape, const HTGraph& g,
                                const std::map<std::string, TypeEmbedding>& embeddings,
                                const Tensor& WQ, const Tensor& WK);

}  // namespace htgl
