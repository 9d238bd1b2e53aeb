// Brute-force scalar reference for the full forward pass, written against the
// model equations directly with plain loops over std::vector<double>. It
// shares no numerical code with the engine (no tape, no sparse kernels, no
// graph helpers) so the two implementations can check each other. Frozen:
// engine changes must conform to this file, not the other way around.
#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat make_mat(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

struct RelationView {
    std::string name;
    std::size_t src_type = 0;
    std::size_t dst_type = 0;
};

struct GraphView {
    std::vector<std::size_t> counts;                // nodes per type
    std::vector<RelationView> relations;            // declaration order
    // edges[t][r] = (src, dst); features[t][type] = n x f
    std::vector<std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>> edges;
    std::vector<std::vector<Mat>> features;
};

struct GruView {
    Mat Wz, Uz, Wr, Ur, Wh, Uh;
    std::vector<double> bz, br, bh;
};

struct WeightsView {
    std::vector<Mat> proj_W;                        // per type: f x d
    std::vector<std::vector<double>> proj_b;        // per type: d
    std::vector<std::vector<GruView>> gru;          // [layer][relation]
    Mat WQ, WK;                                     // llm_dim x sim_dim
    std::vector<std::vector<double>> embeddings;    // per type: llm_dim
    Mat temporal_W;                                 // window x horizon
    std::vector<double> temporal_b;                 // horizon
    Mat head1_W, head2_W;
    std::vector<double> head1_b, head2_b;
};

struct ConfigView {
    std::size_t dim = 0, heads = 1, layers = 1;
    std::size_t window = 0, horizon = 1;
    std::size_t target_type = 0;
    std::size_t window_end = 0;  // index of the last consumed snapshot
};

struct ResultView {
    std::vector<Mat> predictions;  // per future step: n_target x out
    std::vector<Mat> projected;    // per future step: n_target x dim
    // alpha[layer][ti][type] -> one weight per inbound relation
    std::vector<std::vector<std::vector<std::vector<double>>>> alpha;
    std::vector<std::vector<double>> e0;  // per type, over inbound relations
};

inline double o_elu(double x) { return x > 0.0 ? x : std::exp(x) - 1.0; }
inline double o_sig(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline std::vector<double> o_softmax(const std::vector<double>& v) {
    double mx = v.front();
    for (double x : v) mx = std::max(mx, x);
    double z = 0.0;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) z += (out[i] = std::exp(v[i] - mx));
    for (double& x : out) x /= z;
    return out;
}

// x (n x a) times W (a x b) plus optional bias over rows.
inline Mat o_affine(const Mat& x, const Mat& w, const std::vector<double>* b) {
    Mat out = make_mat(x.size(), w.front().size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < w.front().size(); ++j) {
            double acc = b ? (*b)[j] : 0.0;
            for (std::size_t a = 0; a < w.size(); ++a) acc += x[i][a] * w[a][j];
            out[i][j] = acc;
        }
    return out;
}

// Normalized dense adjacency, destination rows by source columns. Duplicate
// edges collapse. Same-type relations use the symmetric scaling, cross-type
// the destination-degree scaling.
inline Mat o_adjacency(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                       std::size_t n_src, std::size_t n_dst, bool same_type) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> uniq(edges.begin(), edges.end());
    std::vector<double> in_deg(n_dst, 0.0), out_deg(n_src, 0.0);
    for (const auto& [s, d] : uniq) {
        out_deg[s] += 1.0;
        in_deg[d] += 1.0;
    }
    Mat a = make_mat(n_dst, n_src);
    for (const auto& [s, d] : uniq)
        a[d][s] = same_type ? 1.0 / std::sqrt(in_deg[d] * out_deg[s]) : 1.0 / in_deg[d];
    return a;
}

// One recurrent gate update per row of x; hidden width k.
inline Mat o_gru(const Mat& x, const Mat& h, const GruView& g) {
    const std::size_t n = x.size(), k = g.bz.size(), din = x.front().size();
    Mat out = make_mat(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> zg(k), rg(k);
        for (std::size_t j = 0; j < k; ++j) {
            double az = g.bz[j], ar = g.br[j];
            for (std::size_t f = 0; f < din; ++f) {
                az += x[i][f] * g.Wz[f][j];
                ar += x[i][f] * g.Wr[f][j];
            }
            for (std::size_t l = 0; l < k; ++l) {
                az += h[i][l] * g.Uz[l][j];
                ar += h[i][l] * g.Ur[l][j];
            }
            zg[j] = o_sig(az);
            rg[j] = o_sig(ar);
        }
        for (std::size_t j = 0; j < k; ++j) {
            double ac = g.bh[j];
            for (std::size_t f = 0; f < din; ++f) ac += x[i][f] * g.Wh[f][j];
            for (std::size_t l = 0; l < k; ++l) ac += rg[l] * h[i][l] * g.Uh[l][j];
            const double cand = std::tanh(ac);
            out[i][j] = (1.0 - zg[j]) * h[i][j] + zg[j] * cand;
        }
    }
    return out;
}

inline std::vector<std::size_t> o_inbound(const GraphView& g, std::size_t type) {
    std::vector<std::size_t> rels;
    for (std::size_t r = 0; r < g.relations.size(); ++r)
        if (g.relations[r].dst_type == type) rels.push_back(r);
    return rels;
}

inline ResultView forward(const GraphView& g, const WeightsView& w, const ConfigView& c) {
    const std::size_t n_types = g.counts.size();
    ResultView res;

    // initial coefficients: softmax over (emb_src W_Q) . (emb_dst W_K)
    res.e0.resize(n_types);
    for (std::size_t v = 0; v < n_types; ++v) {
        const auto rels = o_inbound(g, v);
        if (rels.empty()) throw std::runtime_error("oracle: type with no inbound relations");
        const std::size_t ds = w.WQ.front().size();
        std::vector<double> key(ds, 0.0);
        for (std::size_t j = 0; j < ds; ++j)
            for (std::size_t a = 0; a < w.WK.size(); ++a)
                key[j] += w.embeddings[v][a] * w.WK[a][j];
        std::vector<double> sims;
        for (std::size_t r : rels) {
            std::vector<double> q(ds, 0.0);
            for (std::size_t j = 0; j < ds; ++j)
                for (std::size_t a = 0; a < w.WQ.size(); ++a)
                    q[j] += w.embeddings[g.relations[r].src_type][a] * w.WQ[a][j];
            double s = 0.0;
            for (std::size_t j = 0; j < ds; ++j) s += q[j] * key[j];
            sims.push_back(s);
        }
        res.e0[v] = o_softmax(sims);
    }

    const std::size_t t0 = c.window_end + 1 - c.window;

    // layer-1 inputs: per-type affine projection of raw features
    std::vector<std::vector<Mat>> inputs(n_types, std::vector<Mat>(c.window));
    for (std::size_t v = 0; v < n_types; ++v)
        for (std::size_t ti = 0; ti < c.window; ++ti)
            inputs[v][ti] = o_affine(g.features[t0 + ti][v], w.proj_W[v], &w.proj_b[v]);

    res.alpha.resize(c.layers);
    for (std::size_t layer = 0; layer < c.layers; ++layer) {
        res.alpha[layer].assign(c.window, {});
        // chain state per (type, inbound-relation position)
        std::vector<std::vector<Mat>> estate(n_types);
        for (std::size_t v = 0; v < n_types; ++v) {
            const auto rels = o_inbound(g, v);
            for (std::size_t p = 0; p < rels.size(); ++p)
                estate[v].push_back(Mat(g.counts[v], std::vector<double>(c.heads, res.e0[v][p])));
        }
        std::vector<std::vector<Mat>> next(n_types, std::vector<Mat>(c.window));
        for (std::size_t ti = 0; ti < c.window; ++ti) {
            res.alpha[layer][ti].resize(n_types);
            for (std::size_t v = 0; v < n_types; ++v) {
                const auto rels = o_inbound(g, v);
                std::vector<Mat> per_rel;
                std::vector<double> ebar;
                for (std::size_t p = 0; p < rels.size(); ++p) {
                    const std::size_t r = rels[p];
                    const auto& rel = g.relations[r];
                    Mat a = o_adjacency(g.edges[t0 + ti][r], g.counts[rel.src_type],
                                        g.counts[rel.dst_type], rel.src_type == rel.dst_type);
                    // aggregate: a (n_dst x n_src) times inputs[src][ti] (n_src x d), then ELU
                    Mat agg = make_mat(g.counts[v], c.dim);
                    const Mat& hsrc = inputs[rel.src_type][ti];
                    for (std::size_t i = 0; i < g.counts[v]; ++i)
                        for (std::size_t jj = 0; jj < c.dim; ++jj) {
                            double acc = 0.0;
                            for (std::size_t s = 0; s < hsrc.size(); ++s)
                                acc += a[i][s] * hsrc[s][jj];
                            agg[i][jj] = o_elu(acc);
                        }
                    Mat e_new = o_gru(agg, estate[v][p], w.gru[layer][r]);
                    estate[v][p] = e_new;
                    double mean = 0.0;
                    for (const auto& row : e_new)
                        for (double x : row) mean += x;
                    ebar.push_back(mean / double(g.counts[v] * c.heads));
                    per_rel.push_back(std::move(agg));
                }
                const std::vector<double> alpha = o_softmax(ebar);
                res.alpha[layer][ti][v] = alpha;
                Mat fused = make_mat(g.counts[v], c.dim);
                for (std::size_t p = 0; p < per_rel.size(); ++p)
                    for (std::size_t i = 0; i < g.counts[v]; ++i)
                        for (std::size_t jj = 0; jj < c.dim; ++jj)
                            fused[i][jj] += alpha[p] * per_rel[p][i][jj];
                next[v][ti] = std::move(fused);
            }
        }
        inputs = std::move(next);
    }

    // temporal contraction over the window, then the shared two-layer head
    const std::size_t nt = g.counts[c.target_type];
    for (std::size_t s = 0; s < c.horizon; ++s) {
        Mat z = make_mat(nt, c.dim);
        for (std::size_t i = 0; i < nt; ++i)
            for (std::size_t jj = 0; jj < c.dim; ++jj) {
                double acc = w.temporal_b[s];
                for (std::size_t ti = 0; ti < c.window; ++ti)
                    acc += w.temporal_W[ti][s] * inputs[c.target_type][ti][i][jj];
                z[i][jj] = acc;
            }
        Mat h1 = o_affine(z, w.head1_W, &w.head1_b);
        for (auto& row : h1)
            for (double& x : row) x = o_elu(x);
        res.predictions.push_back(o_affine(h1, w.head2_W, &w.head2_b));
        res.projected.push_back(std::move(z));
    }
    return res;
}

}  // namespace oracle
