#include "htgl/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace htgl {

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        pos = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::uint32_t parse_u32(const std::string& field, const fs::path& file, std::size_t line_no) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw std::invalid_argument("bad integer '" + field + "' at " + file.string() + ":" +
                                    std::to_string(line_no));
    }
    return v;
}

double parse_f64(const std::string& field, const fs::path& file, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw std::invalid_argument("bad float '" + field + "' at " + file.string() + ":" +
                                    std::to_string(line_no));
    }
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

void check_name(const std::string& name, const char* what) {
    if (name.empty() || name.find('/') != std::string::npos) {
        throw std::invalid_argument(std::string(what) + " name '" + name +
                                    "' must be non-empty and contain no '/'");
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::size_t HTGraph::type_index(const std::string& name) const {
    for (std::size_t i = 0; i < node_types.size(); ++i)
        if (node_types[i].name == name) return i;
    throw std::invalid_argument("unknown node type '" + name + "'");
}

std::size_t HTGraph::relation_index(const std::string& name) const {
    for (std::size_t i = 0; i < relation_types.size(); ++i)
        if (relation_types[i].name == name) return i;
    throw std::invalid_argument("unknown relation '" + name + "'");
}

bool HTGraph::has_relation(const std::string& name) const {
    for (const auto& r : relation_types)
        if (r.name == name) return true;
    return false;
}

std::vector<std::size_t> HTGraph::relations_into(std::size_t type) const {
    std::vector<std::size_t> out;
    const std::string& name = node_types.at(type).name;
    for (std::size_t i = 0; i < relation_types.size(); ++i)
        if (relation_types[i].dst_type == name) out.push_back(i);
    return out;
}

void HTGraph::validate() const {
    if (node_types.empty()) {
        throw std::invalid_argument("graph has no node types");
    }
    if (node_types.size() + relation_types.size() < 2) {
        throw std::invalid_argument("graph is homogeneous: needs at least two node or relation types");
    }
    std::set<std::string> seen;
    for (const auto& nt : node_types) {
        check_name(nt.name, "node type");
        if (!seen.insert(nt.name).second) {
            throw std::invalid_argument("duplicate node type '" + nt.name + "'");
        }
        if (nt.count == 0 || nt.feature_dim == 0) {
            throw std::invalid_argument("node type '" + nt.name +
                                        "' must have positive count and feature_dim");
        }
    }
    seen.clear();
    for (const auto& rt : relation_types) {
        check_name(rt.name, "relation");
        if (!seen.insert(rt.name).second) {
            throw std::invalid_argument("duplicate relation '" + rt.name + "'");
        }
        type_index(rt.src_type);  // throws when missing
        type_index(rt.dst_type);
    }
    for (std::size_t t = 0; t < snapshots.size(); ++t) {
        const Snapshot& s = snapshots[t];
        if (s.edges.size() != relation_types.size() || s.features.size() != node_types.size()) {
            throw std::invalid_argument("snapshot " + std::to_string(t) +
                                        " does not cover every declared type");
        }
        for (std::size_t v = 0; v < node_types.size(); ++v) {
            const auto& nt = node_types[v];
            const Tensor& f = s.features[v];
            if (!f.defined() || f.shape().size() != 2 || f.rows() != nt.count ||
                f.cols() != nt.feature_dim) {
                throw std::invalid_argument(
                    "features of type '" + nt.name + "' snapshot " + std::to_string(t) +
                    " must be " + std::to_string(nt.count) + " x " +
                    std::to_string(nt.feature_dim));
            }
        }
        for (std::size_t r = 0; r < relation_types.size(); ++r) {
            const auto& rt = relation_types[r];
            const std::size_t n_src = node_types[type_index(rt.src_type)].count;
            const std::size_t n_dst = node_types[type_index(rt.dst_type)].count;
            for (const auto& [src, dst] : s.edges[r]) {
                if (src >= n_src || dst >= n_dst) {
                    throw std::invalid_argument(
                        "edge (" + std::to_string(src) + ", " + std::to_string(dst) +
                        ") out of range in relation '" + rt.name + "' snapshot " +
                        std::to_string(t));
                }
            }
        }
    }
}

HTGraph load_dataset(const std::string& manifest_path) {
    const fs::path mpath(manifest_path);
    json m;
    try {
        m = json::parse(read_text(mpath));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("manifest " + mpath.string() + ": " + e.what());
    }

    HTGraph g;
    try {
        for (const auto& jt : m.at("node_types")) {
            NodeTypeMeta nt;
            nt.name = jt.at("name").get<std::string>();
            nt.count = jt.at("count").get<std::size_t>();
            nt.feature_dim = jt.at("feature_dim").get<std::size_t>();
            nt.description = jt.value("description", std::string{});
            g.node_types.push_back(std::move(nt));
        }
        for (const auto& jr : m.value("relation_types", json::array())) {
            RelationTypeMeta rt;
            rt.name = jr.at("name").get<std::string>();
            rt.src_type = jr.at("src").get<std::string>();
            rt.dst_type = jr.at("dst").get<std::string>();
            g.relation_types.push_back(std::move(rt));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument("manifest " + mpath.string() + ": " + e.what());
    }
    if (!m.contains("T") || !m["T"].is_number_unsigned()) {
        throw std::invalid_argument("manifest " + mpath.string() + ": missing unsigned field 'T'");
    }
    const std::size_t T = m["T"].get<std::size_t>();
    const std::string edges_dir = m.value("edges_dir", "edges");
    const std::string features_dir = m.value("features_dir", "features");
    const fs::path base = mpath.parent_path();

    for (std::size_t t = 0; t < T; ++t) {
        Snapshot snap;
        for (const auto& rt : g.relation_types) {
            const fs::path file = base / edges_dir / rt.name / (std::to_string(t) + ".csv");
            auto lines = split_lines(read_text(file));
            if (lines.empty() || lines[0] != "src,dst") {
                throw std::invalid_argument("edge file " + file.string() +
                                            " must start with header 'src,dst'");
            }
            EdgeList edges;
            for (std::size_t i = 1; i < lines.size(); ++i) {
                auto fields = split_fields(lines[i]);
                if (fields.size() != 2) {
                    throw std::invalid_argument("edge file " + file.string() + ":" +
                                                std::to_string(i + 1) + " needs two fields");
                }
                edges.emplace_back(parse_u32(fields[0], file, i + 1),
                                   parse_u32(fields[1], file, i + 1));
            }
            snap.edges.push_back(std::move(edges));
        }
        for (const auto& nt : g.node_types) {
            const fs::path file = base / features_dir / nt.name / (std::to_string(t) + ".csv");
            auto lines = split_lines(read_text(file));
            if (lines.size() != nt.count) {
                throw std::invalid_argument("feature file " + file.string() + " has " +
                                            std::to_string(lines.size()) + " rows, expected " +
                                            std::to_string(nt.count));
            }
            std::vector<double> data;
            data.reserve(nt.count * nt.feature_dim);
            for (std::size_t i = 0; i < lines.size(); ++i) {
                auto fields = split_fields(lines[i]);
                if (fields.size() != nt.feature_dim) {
                    throw std::invalid_argument("feature file " + file.string() + ":" +
                                                std::to_string(i + 1) + " has " +
                                                std::to_string(fields.size()) +
                                                " values, expected " +
                                                std::to_string(nt.feature_dim));
                }
                for (const auto& fld : fields) data.push_back(parse_f64(fld, file, i + 1));
            }
            snap.features.push_back(Tensor::from({nt.count, nt.feature_dim}, std::move(data)));
        }
        g.snapshots.push_back(std::move(snap));
    }
    g.validate();
    return g;
}

void write_dataset(const HTGraph& g, const std::string& dir) {
    g.validate();
    const fs::path base(dir);
    fs::create_directories(base);

    json m;
    m["node_types"] = json::array();
    for (const auto& nt : g.node_types) {
        m["node_types"].push_back({{"name", nt.name},
                                   {"count", nt.count},
                                   {"feature_dim", nt.feature_dim},
                                   {"description", nt.description}});
    }
    m["relation_types"] = json::array();
    for (const auto& rt : g.relation_types) {
        m["relation_types"].push_back(
            {{"name", rt.name}, {"src", rt.src_type}, {"dst", rt.dst_type}});
    }
    m["T"] = g.T();
    m["edges_dir"] = "edges";
    m["features_dir"] = "features";
    {
        std::ofstream out(base / "manifest.json", std::ios::binary);
        out << m.dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write " + (base / "manifest.json").string());
    }

    for (std::size_t r = 0; r < g.relation_types.size(); ++r) {
        const fs::path rdir = base / "edges" / g.relation_types[r].name;
        fs::create_directories(rdir);
        for (std::size_t t = 0; t < g.T(); ++t) {
            std::ofstream out(rdir / (std::to_string(t) + ".csv"), std::ios::binary);
            out << "src,dst\n";
            for (const auto& [src, dst] : g.snapshots[t].edges[r])
                out << src << "," << dst << "\n";
            if (!out) throw std::runtime_error("cannot write edge file under " + rdir.string());
        }
    }
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        const fs::path fdir = base / "features" / g.node_types[v].name;
        fs::create_directories(fdir);
        const std::size_t fd = g.node_types[v].feature_dim;
        for (std::size_t t = 0; t < g.T(); ++t) {
            std::ofstream out(fdir / (std::to_string(t) + ".csv"), std::ios::binary);
            const Tensor& f = g.snapshots[t].features[v];
            for (std::size_t i = 0; i < f.rows(); ++i) {
                for (std::size_t j = 0; j < fd; ++j) {
                    if (j) out << ",";
                    out << fmt_double(f.value()[i * fd + j]);
                }
                out << "\n";
            }
            if (!out) throw std::runtime_error("cannot write feature file under " + fdir.string());
        }
    }
}

SparseMatrix normalize_adjacency(const EdgeList& dst_src, std::size_t n_dst, std::size_t n_src,
                                 NormKind kind) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> unique;
    for (const auto& [dst, src] : dst_src) {
        if (dst >= n_dst || src >= n_src) {
            throw std::invalid_argument("adjacency entry (" + std::to_string(dst) + ", " +
                                        std::to_string(src) + ") out of bounds for " +
                                        std::to_string(n_dst) + " x " + std::to_string(n_src));
        }
        unique.emplace(dst, src);
    }
    std::vector<std::size_t> in_deg(n_dst, 0), out_deg(n_src, 0);
    for (const auto& [dst, src] : unique) {
        ++in_deg[dst];
        ++out_deg[src];
    }
    SparseMatrix adj{n_dst, n_src, {}};
    adj.entries.reserve(unique.size());
    for (const auto& [dst, src] : unique) {
        double w = 0.0;
        if (kind == NormKind::Row) {
            w = 1.0 / static_cast<double>(in_deg[dst]);
        } else {
            w = 1.0 / std::sqrt(static_cast<double>(in_deg[dst]) *
                                static_cast<double>(out_deg[src]));
        }
        adj.entries.push_back({dst, src, w});
    }
    return adj;
}

SparseMatrix relation_adjacency(const HTGraph& g, std::size_t relation, std::size_t t,
                                NormKind kind) {
    const auto& rt = g.relation_types.at(relation);
    const std::size_t n_src = g.node_types[g.type_index(rt.src_type)].count;
    const std::size_t n_dst = g.node_types[g.type_index(rt.dst_type)].count;
    EdgeList flipped;
    flipped.reserve(g.snapshots.at(t).edges[relation].size());
    for (const auto& [src, dst] : g.snapshots[t].edges[relation]) flipped.emplace_back(dst, src);
    return normalize_adjacency(flipped, n_dst, n_src, kind);
}

NormKind default_norm_kind(const RelationTypeMeta& rel) {
    return rel.src_type == rel.dst_type ? NormKind::Sym : NormKind::Row;
}

void add_self_relation(HTGraph& g) {
    for (const auto& nt : g.node_types) {
        const std::string name = "self." + nt.name;
        if (g.has_relation(name)) continue;
        g.relation_types.push_back({name, nt.name, nt.name});
        for (auto& snap : g.snapshots) {
            EdgeList identity;
            identity.reserve(nt.count);
            for (std::uint32_t i = 0; i < nt.count; ++i) identity.emplace_back(i, i);
            snap.edges.push_back(std::move(identity));
        }
    }
}

TemporalSplit split_temporal(const HTGraph& g, std::size_t window, std::size_t horizon,
                             std::size_t n_val, std::size_t n_test) {
    if (window == 0 || horizon == 0) {
        throw std::invalid_argument("split_temporal: window and horizon must be positive");
    }
    const std::size_t T = g.T();
    const std::size_t need = window + horizon + n_val + n_test;
    if (T < need) {
        throw std::invalid_argument(
            "split_temporal: need at least window + horizon + n_val + n_test = " +
            std::to_string(window) + " + " + std::to_string(horizon) + " + " +
            std::to_string(n_val) + " + " + std::to_string(n_test) + " = " +
            std::to_string(need) + " snapshots, have " + std::to_string(T));
    }
    std::vector<std::size_t> targets;
    for (std::size_t t = window; t + horizon <= T; ++t) targets.push_back(t);

    TemporalSplit split;
    split.window = window;
    split.horizon = horizon;
    const std::size_t n_train = targets.size() - n_val - n_test;
    split.train.assign(targets.begin(), targets.begin() + n_train);
    split.val.assign(targets.begin() + n_train, targets.begin() + n_train + n_val);
    split.test.assign(targets.begin() + n_train + n_val, targets.end());
    return split;
}

}  // namespace htgl
