#include "htgl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "htgl/model.hpp"
#include "htgl/optim.hpp"
#include "htgl/params.hpp"
#include "htgl/prompt.hpp"
#include "htgl/rng.hpp"
#include "htgl/variants.hpp"
#include "json.hpp"

namespace htgl {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void check_sweep(const char* axis, const std::vector<std::size_t>& values) {
    if (values.empty()) return;
    if (values.size() < 3) {
        throw std::invalid_argument(std::string("bench: sweep over ") + axis +
                                    " needs at least 3 points, got " +
                                    std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] == 0) throw std::invalid_argument(std::string("bench: ") + axis + " = 0");
        if (i > 0 && values[i] <= values[i - 1]) {
            throw std::invalid_argument(std::string("bench: sweep over ") + axis +
                                        " must be strictly increasing");
        }
    }
}

struct CellSpec {
    BenchModel model;
    std::string axis;
    std::size_t T, n, e;
};

/// Median epoch time of one instance. The epoch is a full-window training
/// step: forward over all T snapshots, a scalar loss, backward, one Adam
/// update. One warm-up epoch runs first so adjacency/edge caches and lazy
/// allocations never land inside a timed run.
BenchCell run_cell(const CellSpec& spec, const BenchOptions& opt) {
    const BenchGrid& grid = opt.grid;
    HTGraph g = benchmark_graph(spec.T, spec.n, spec.e, grid.dim, opt.seed);
    const std::size_t target = g.type_index("item");

    ModelConfig mc;
    mc.dim = grid.dim;
    mc.heads = 1;
    mc.layers = opt.layers;
    mc.window = spec.T;  // the whole history is consumed per step
    mc.horizon = 1;
    mc.llm_dim = 16;

    ForwardOptions fo;
    fo.window_end = spec.T - 1;

    std::map<std::string, TypeEmbedding> embeddings;
    std::unique_ptr<ModelParams> params;
    std::unique_ptr<AttentionScorer> scorer;
    std::unique_ptr<Aggregator> aggregator;
    if (spec.model == BenchModel::Primary) {
        params = std::make_unique<ModelParams>(
            variant_params(g, mc, VariantConfig{}, opt.seed));
        scorer = make_scorer(AttentionKind::Dynamic, *params);
        aggregator = make_aggregator(AggregationKind::Simplified, *params);
        ProviderConfig pc;
        pc.kind = "fallback";
        pc.dim = mc.llm_dim;
        pc.seed = opt.seed;
        EmbeddingProvider provider(pc);
        embeddings = embed_dataset(g, provider);
    } else {
        params = std::make_unique<ModelParams>(decoupled_params(g, mc, opt.seed));
    }
    Adam adam(params->entries(), AdamOptions{.lr = 1e-3});

    auto epoch = [&] {
        Tape tape;
        ForwardResult res;
        if (spec.model == BenchModel::Primary) {
            InitCoefficients e0 =
                variant_init(tape, g, *params, embeddings, InitKind::Llm, opt.seed);
            res = forward(tape, g, *params, mc, target, e0, fo, scorer.get(), aggregator.get());
        } else {
            res = decoupled_forward(tape, g, *params, mc, target, fo);
        }
        Tensor loss = tape.mean_all(res.predictions[0]);
        tape.backward(loss);
        adam.step();
        adam.zero_grad();
    };

    epoch();  // warm-up, untimed
    std::vector<double> samples;
    samples.reserve(opt.repeats);
    for (std::size_t r = 0; r < opt.repeats; ++r) {
        const double t0 = now_ms();
        epoch();
        samples.push_back(now_ms() - t0);
    }

    BenchCell cell;
    cell.model = spec.model;
    cell.axis = spec.axis;
    cell.T = spec.T;
    cell.n = spec.n;
    cell.R = g.relation_types.size();
    cell.e = spec.e;
    cell.d = grid.dim;
    cell.params = params->param_count();
    cell.epoch_ms_median = median(samples);
    cell.repeats = opt.repeats;
    if (cell.epoch_ms_median < opt.min_epoch_ms) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", cell.epoch_ms_median);
        throw std::runtime_error(std::string("bench: ") + to_string(spec.model) + " cell T=" +
                                 std::to_string(spec.T) + " n=" + std::to_string(spec.n) +
                                 " e=" + std::to_string(spec.e) + " finished an epoch in " + buf +
                                 " ms, under the " + std::to_string(opt.min_epoch_ms) +
                                 " ms timer floor; enlarge the instance (more nodes or edges)");
    }
    return cell;
}

}  // namespace

const char* to_string(BenchModel m) {
    return m == BenchModel::Primary ? "primary" : "decoupled";
}

BenchModel parse_bench_model(const std::string& s) {
    if (s == "primary") return BenchModel::Primary;
    if (s == "decoupled") return BenchModel::Decoupled;
    throw std::invalid_argument("unknown benchmark model '" + s +
                                "' (expected primary or decoupled)");
}

void BenchOptions::validate() const {
    if (models.empty()) throw std::invalid_argument("bench: no models selected");
    if (repeats < 3) throw std::invalid_argument("bench: repeats must be at least 3");
    if (grid.T == 0 || grid.n == 0 || grid.e == 0 || grid.dim == 0) {
        throw std::invalid_argument("bench: base grid sizes must be positive");
    }
    if (layers == 0) throw std::invalid_argument("bench: layers must be positive");
    check_sweep("T", grid.sweep_T);
    check_sweep("n", grid.sweep_n);
    check_sweep("e", grid.sweep_e);
    if (grid.sweep_T.empty() && grid.sweep_n.empty() && grid.sweep_e.empty()) {
        throw std::invalid_argument("bench: at least one axis must be swept");
    }
    if (min_epoch_ms <= 0.0) throw std::invalid_argument("bench: min_epoch_ms must be positive");
}

double BenchResult::exponent(const std::string& key) const {
    for (const auto& [name, slope] : exponents) {
        if (name == key) return slope;
    }
    throw std::out_of_range("bench: no fitted exponent named '" + key + "'");
}

HTGraph benchmark_graph(std::size_t T, std::size_t n, std::size_t e, std::size_t dim,
                        std::uint64_t seed) {
    HTGraph g;
    g.node_types.push_back({"item", n, dim, "benchmark item"});
    g.node_types.push_back({"actor", n, dim, "benchmark actor"});
    g.relation_types.push_back({"ii", "item", "item"});
    g.relation_types.push_back({"ai", "actor", "item"});
    g.relation_types.push_back({"ia", "item", "actor"});

    rng::SplitMix64 gen{seed ^ 0xBE7C4A5Full};
    for (std::size_t t = 0; t < T; ++t) {
        Snapshot snap;
        for (std::size_t r = 0; r < g.relation_types.size(); ++r) {
            EdgeList edges;
            edges.reserve(e);
            for (std::size_t k = 0; k < e; ++k) {
                edges.emplace_back(static_cast<std::uint32_t>(rng::bounded(gen, n)),
                                   static_cast<std::uint32_t>(rng::bounded(gen, n)));
            }
            snap.edges.push_back(std::move(edges));
        }
        for (std::size_t v = 0; v < g.node_types.size(); ++v) {
            Tensor x = Tensor::zeros({n, dim});
            for (double& val : x.value()) val = rng::gaussian(gen);
            snap.features.push_back(x);
        }
        g.snapshots.push_back(std::move(snap));
    }
    add_self_relation(g);
    g.validate();
    return g;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of an empty sample");
    std::sort(xs.begin(), xs.end());
    const std::size_t mid = xs.size() / 2;
    if (xs.size() % 2 == 1) return xs[mid];
    return 0.5 * (xs[mid - 1] + xs[mid]);
}

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("slope fit needs at least two matched points");
    }
    const std::size_t m = x.size();
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(m), ly(m);
    for (std::size_t i = 0; i < m; ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den == 0.0) throw std::invalid_argument("slope fit needs distinct x values");
    return num / den;
}

BenchResult bench_scaling(const BenchOptions& opt) {
    opt.validate();
    const BenchGrid& grid = opt.grid;

    struct Axis {
        const char* name;
        const std::vector<std::size_t>* values;
    };
    const Axis axes[] = {{"T", &grid.sweep_T}, {"n", &grid.sweep_n}, {"e", &grid.sweep_e}};

    BenchResult result;
    result.repeats = opt.repeats;
    result.seed = opt.seed;
    result.threads = 1;
    for (BenchModel model : opt.models) {
        for (const Axis& axis : axes) {
            if (axis.values->empty()) continue;
            std::vector<double> xs, ys;
            for (std::size_t v : *axis.values) {
                CellSpec spec{model, axis.name, grid.T, grid.n, grid.e};
                if (axis.name[0] == 'T') spec.T = v;
                if (axis.name[0] == 'n') spec.n = v;
                if (axis.name[0] == 'e') spec.e = v;
                BenchCell cell = run_cell(spec, opt);
                xs.push_back(static_cast<double>(v));
                ys.push_back(cell.epoch_ms_median);
                result.cells.push_back(std::move(cell));
            }
            result.exponents.emplace_back(std::string(to_string(model)) + "." + axis.name,
                                          fit_log_slope(xs, ys));
        }
    }
    return result;
}

std::string bench_csv(const BenchResult& r) {
    std::ostringstream out;
    out << "model,T,n,R,e,d,params,epoch_ms_median,repeats\n";
    for (const BenchCell& c : r.cells) {
        char ms[64];
        std::snprintf(ms, sizeof ms, "%.4f", c.epoch_ms_median);
        out << to_string(c.model) << ',' << c.T << ',' << c.n << ',' << c.R << ',' << c.e << ','
            << c.d << ',' << c.params << ',' << ms << ',' << c.repeats << '\n';
    }
    return out.str();
}

void write_bench_csv(const BenchResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << bench_csv(r);
}

std::string bench_summary_json(const BenchResult& r) {
    nlohmann::json exps = nlohmann::json::object();
    for (const auto& [name, slope] : r.exponents) exps[name] = slope;
    nlohmann::json j{{"threads", r.threads},
                     {"repeats", r.repeats},
                     {"seed", r.seed},
                     {"cells", r.cells.size()},
                     {"exponents", std::move(exps)}};
    return j.dump(2) + "\n";
}

void write_bench_summary(const BenchResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << bench_summary_json(r);
}

}  // namespace htgl
