#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "htgl/graph.hpp"

namespace htgl {

/// Which model family a benchmark cell times: the recurrent-attention model
/// or the decoupled per-snapshot + temporal-self-attention baseline.
enum class BenchModel { Primary, Decoupled };

const char* to_string(BenchModel m);
BenchModel parse_bench_model(const std::string& s);

/// Instance sizes for the scaling sweep. Each non-empty sweep axis is varied
/// on its own (the other coordinates stay at their base value); a swept axis
/// needs at least three strictly increasing points for a slope fit. `e` is
/// the edge count per non-self relation per snapshot.
struct BenchGrid {
    std::size_t T = 6;    // base snapshot count (the window always covers all of it)
    std::size_t n = 192;  // base node count per type
    std::size_t e = 1536; // base edges per relation per snapshot
    std::size_t dim = 16; // model width (also the feature width)
    std::vector<std::size_t> sweep_T;
    std::vector<std::size_t> sweep_n;
    std::vector<std::size_t> sweep_e;
};

struct BenchOptions {
    std::vector<BenchModel> models = {BenchModel::Primary, BenchModel::Decoupled};
    BenchGrid grid;
    std::size_t layers = 1;
    std::size_t repeats = 3;
    std::uint64_t seed = 1;
    double min_epoch_ms = 1.0;  // below this the timer is considered unreliable

    void validate() const;
};

struct BenchCell {
    BenchModel model = BenchModel::Primary;
    std::string axis;  // which sweep produced this cell: "T", "n", or "e"
    std::size_t T = 0, n = 0, R = 0, e = 0, d = 0;
    std::size_t params = 0;
    double epoch_ms_median = 0.0;
    std::size_t repeats = 0;
};

struct BenchResult {
    std::vector<BenchCell> cells;
    /// "<model>.<axis>" -> log-log least-squares slope over that sweep.
    std::vector<std::pair<std::string, double>> exponents;
    std::size_t threads = 1;  // the engine never spawns threads; recorded anyway
    std::size_t repeats = 0;
    std::uint64_t seed = 0;

    double exponent(const std::string& key) const;  // throws on unknown key
};

/// Deterministic two-type benchmark instance: `e` random edges per non-self
/// relation per snapshot, Gaussian features, self relations appended.
HTGraph benchmark_graph(std::size_t T, std::size_t n, std::size_t e, std::size_t dim,
                        std::uint64_t seed);

double median(std::vector<double> xs);

/// Least-squares slope of log(y) against log(x).
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Times one full-window optimization step (forward over every snapshot,
/// backward, one optimizer update) per cell: one untimed warm-up epoch, then
/// `repeats` timed epochs, median reported. Cells run sequentially on one
/// thread. A median under min_epoch_ms raises an error asking for a larger
/// instance instead of returning noise.
BenchResult bench_scaling(const BenchOptions& opt);

/// One row per cell: model,T,n,R,e,d,params,epoch_ms_median,repeats.
std::string bench_csv(const BenchResult& r);
void write_bench_csv(const BenchResult& r, const std::string& path);

/// Summary with the fitted exponents, thread count, repeats, and seed.
std::string bench_summary_json(const BenchResult& r);
void write_bench_summary(const BenchResult& r, const std::string& path);

}  // namespace htgl
