#include "htgl/synth.hpp"

#include <random>
#include <stdexcept>

#include "htgl/rng.hpp"

namespace htgl {

namespace {

using Gen = std::mt19937_64;

Tensor noise_matrix(std::size_t n, std::size_t f, Gen& gen, double scale) {
    std::vector<double> v(n * f);
    for (auto& x : v) x = scale * rng::gaussian(gen);
    return Tensor::from({n, f}, std::move(v));
}

std::vector<std::vector<double>> draw_prototypes(std::size_t k, std::size_t f, Gen& gen) {
    std::vector<std::vector<double>> protos(k, std::vector<double>(f));
    for (auto& p : protos)
        for (auto& x : p) x = rng::gaussian(gen);
    return protos;
}

Tensor community_features(const std::vector<std::size_t>& community,
                          const std::vector<std::vector<double>>& protos, std::size_t f, Gen& gen,
                          double noise) {
    const std::size_t n = community.size();
    std::vector<double> v(n * f);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = protos[community[i]];
        for (std::size_t j = 0; j < f; ++j) v[i * f + j] = p[j] + noise * rng::gaussian(gen);
    }
    return Tensor::from({n, f}, std::move(v));
}

EdgeList within_community_pairs(const std::vector<std::size_t>& community, std::size_t k) {
    std::vector<std::vector<std::uint32_t>> members(k);
    for (std::size_t i = 0; i < community.size(); ++i)
        members[community[i]].push_back(static_cast<std::uint32_t>(i));
    EdgeList edges;
    for (const auto& m : members)
        for (std::uint32_t u : m)
            for (std::uint32_t v : m)
                if (u != v) edges.emplace_back(u, v);
    return edges;
}

std::vector<std::size_t> round_robin(std::size_t n, std::size_t k) {
    std::vector<std::size_t> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = i % k;
    return c;
}

SynthOutput make_generic(const SynthConfig& cfg, Gen& gen) {
    if (cfg.types.empty()) {
        throw std::invalid_argument("generic synthesis needs at least one type spec");
    }
    for (const auto& r : cfg.relations) {
        if (!(r.density > 0.0 && r.density <= 1.0)) {
            throw std::invalid_argument("relation '" + r.name + "' density must be in (0, 1]");
        }
    }
    SynthOutput out;
    for (const auto& ts : cfg.types) {
        if (ts.count == 0 || ts.feature_dim == 0) {
            throw std::invalid_argument("type '" + ts.name +
                                        "' needs positive count and feature_dim");
        }
        out.graph.node_types.push_back({ts.name, ts.count, ts.feature_dim, ts.description});
    }
    for (const auto& rs : cfg.relations)
        out.graph.relation_types.push_back({rs.name, rs.src, rs.dst});

    for (std::size_t t = 0; t < cfg.T; ++t) {
        Snapshot snap;
        for (const auto& rs : cfg.relations) {
            const auto& src = out.graph.node_types[out.graph.type_index(rs.src)];
            const auto& dst = out.graph.node_types[out.graph.type_index(rs.dst)];
            EdgeList edges;
            for (std::uint32_t i = 0; i < src.count; ++i)
                for (std::uint32_t j = 0; j < dst.count; ++j)
                    if (rng::unit(gen) < rs.density) edges.emplace_back(i, j);
            snap.edges.push_back(std::move(edges));
        }
        for (const auto& ts : cfg.types)
            snap.features.push_back(noise_matrix(ts.count, ts.feature_dim, gen, 1.0));
        out.graph.snapshots.push_back(std::move(snap));
    }
    out.target_type = cfg.types.front().name;
    return out;
}

SynthOutput make_planted_link(const SynthConfig& cfg, Gen& gen) {
    if (cfg.communities == 0 || cfg.n_primary < cfg.communities) {
        throw std::invalid_argument("planted link needs communities >= 1 and n_primary >= communities");
    }
    SynthOutput out;
    out.graph.node_types.push_back(
        {"author", cfg.n_primary, cfg.feature_dim,
         "Researchers who repeatedly collaborate inside stable communities; their interests "
         "drift slowly over time."});
    out.graph.node_types.push_back(
        {"paper", cfg.n_secondary, cfg.feature_dim,
         "Publications produced inside one research community; topical content follows the "
         "community's interests."});
    out.graph.relation_types.push_back({"coauthor", "author", "author"});
    out.graph.relation_types.push_back({"writes", "author", "paper"});
    out.graph.relation_types.push_back({"written_by", "paper", "author"});

    out.community = round_robin(cfg.n_primary, cfg.communities);
    const auto paper_comm = round_robin(cfg.n_secondary, cfg.communities);
    const auto author_protos = draw_prototypes(cfg.communities, cfg.feature_dim, gen);
    const auto paper_protos = draw_prototypes(cfg.communities, cfg.feature_dim, gen);

    const EdgeList coauthor = within_community_pairs(out.community, cfg.communities);
    EdgeList writes;  // author -> paper within the shared community
    {
        std::vector<std::vector<std::uint32_t>> papers(cfg.communities);
        for (std::size_t p = 0; p < cfg.n_secondary; ++p)
            papers[paper_comm[p]].push_back(static_cast<std::uint32_t>(p));
        for (std::size_t a = 0; a < cfg.n_primary; ++a)
            for (std::uint32_t p : papers[out.community[a]])
                writes.emplace_back(static_cast<std::uint32_t>(a), p);
    }
    EdgeList written_by;
    written_by.reserve(writes.size());
    for (const auto& [a, p] : writes) written_by.emplace_back(p, a);

    for (std::size_t t = 0; t < cfg.T; ++t) {
        Snapshot snap;
        snap.edges = {coauthor, writes, written_by};
        snap.features.push_back(
            community_features(out.community, author_protos, cfg.feature_dim, gen, cfg.noise));
        snap.features.push_back(
            community_features(paper_comm, paper_protos, cfg.feature_dim, gen, cfg.noise));
        out.graph.snapshots.push_back(std::move(snap));
    }
    out.target_type = "author";
    out.target_relation = "coauthor";
    out.regress_targets.reserve(cfg.n_primary);
    for (std::size_t i = 0; i < cfg.n_primary; ++i)
        out.regress_targets.push_back(author_protos[out.community[i]][0]);
    return out;
}

SynthOutput make_regime_switch(const SynthConfig& cfg, Gen& gen) {
    if (cfg.regime_communities == 0 || cfg.n_target < cfg.regime_communities) {
        throw std::invalid_argument(
            "regime switch needs regime_communities >= 1 and n_target >= regime_communities");
    }
    if (cfg.switch_at == 0 || cfg.switch_at >= cfg.T) {
        throw std::invalid_argument("switch_at must fall strictly inside (0, T)");
    }
    SynthOutput out;
    out.graph.node_types.push_back(
        {"v", cfg.n_target, cfg.feature_dim,
         "Core entities forming persistent interaction clusters; their own features carry no "
         "cluster signal."});
    out.graph.node_types.push_back(
        {"a", cfg.n_side, cfg.feature_dim,
         "Observers attached to core entities; informative about clusters only in the early "
         "period."});
    out.graph.node_types.push_back(
        {"b", cfg.n_side, cfg.feature_dim,
         "Observers attached to core entities; informative about clusters only in the late "
         "period."});
    out.graph.relation_types.push_back({"vv", "v", "v"});
    out.graph.relation_types.push_back({"av", "a", "v"});
    out.graph.relation_types.push_back({"bv", "b", "v"});

    out.community = round_robin(cfg.n_target, cfg.regime_communities);
    const auto protos = draw_prototypes(cfg.regime_communities, cfg.feature_dim, gen);

    const EdgeList vv = within_community_pairs(out.community, cfg.regime_communities);
    EdgeList av, bv;
    std::vector<std::size_t> host_comm(cfg.n_side);
    for (std::size_t i = 0; i < cfg.n_side; ++i) {
        const auto host = static_cast<std::uint32_t>(i % cfg.n_target);
        av.emplace_back(static_cast<std::uint32_t>(i), host);
        bv.emplace_back(static_cast<std::uint32_t>(i), host);
        host_comm[i] = out.community[host];
    }

    for (std::size_t t = 0; t < cfg.T; ++t) {
        const bool early = t < cfg.switch_at;
        Snapshot snap;
        snap.edges = {vv, av, bv};
        snap.features.push_back(noise_matrix(cfg.n_target, cfg.feature_dim, gen, 1.0));
        Tensor a_feat = early
                            ? community_features(host_comm, protos, cfg.feature_dim, gen, cfg.noise)
                            : noise_matrix(cfg.n_side, cfg.feature_dim, gen, 1.0);
        Tensor b_feat = early
                            ? noise_matrix(cfg.n_side, cfg.feature_dim, gen, 1.0)
                            : community_features(host_comm, protos, cfg.feature_dim, gen, cfg.noise);
        snap.features.push_back(std::move(a_feat));
        snap.features.push_back(std::move(b_feat));
        out.graph.snapshots.push_back(std::move(snap));
    }
    out.target_type = "v";
    out.target_relation = "vv";
    out.regress_targets.reserve(cfg.n_target);
    for (std::size_t i = 0; i < cfg.n_target; ++i)
        out.regress_targets.push_back(protos[out.community[i]][0]);
    return out;
}

}  // namespace

SynthOutput generate_synthetic(const SynthConfig& cfg) {
    if (cfg.T == 0) {
        throw std::invalid_argument("synthesis needs T >= 1");
    }
    if (cfg.feature_dim == 0) {
        throw std::invalid_argument("synthesis needs feature_dim >= 1");
    }
    Gen gen(cfg.seed);
    SynthOutput out;
    switch (cfg.kind) {
        case SynthKind::Generic: out = make_generic(cfg, gen); break;
        case SynthKind::PlantedLink: out = make_planted_link(cfg, gen); break;
        case SynthKind::RegimeSwitch: out = make_regime_switch(cfg, gen); break;
    }
    out.graph.validate();
    return out;
}

}  // namespace htgl
