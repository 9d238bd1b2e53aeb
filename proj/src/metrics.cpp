#include "htgl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace htgl {

namespace {

void require_both(const std::vector<double>& pos, const std::vector<double>& neg,
                  const char* what) {
    if (pos.empty() || neg.empty()) {
        throw std::invalid_argument(std::string(what) +
                                    ": both positive and negative scores are required (got " +
                                    std::to_string(pos.size()) + " / " +
                                    std::to_string(neg.size()) + ")");
    }
}

void require_matched(std::size_t a, std::size_t b, const char* what) {
    if (a != b || a == 0) {
        throw std::invalid_argument(std::string(what) + ": need matching non-empty inputs (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

void require_finite(const std::vector<double>& scores, const char* what) {
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument(std::string(what) + ": non-finite score in input");
        }
    }
}

}  // namespace

double auc(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores) {
    require_both(pos_scores, neg_scores, "auc");
    require_finite(pos_scores, "auc");
    require_finite(neg_scores, "auc");
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.push_back({s, true});
    for (double s : neg_scores) all.push_back({s, false});
    std::stable_sort(all.begin(), all.end(),
                     [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i + 1;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double midrank = 0.5 * (double(i + 1) + double(j));  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (all[k].positive) pos_rank_sum += midrank;
        i = j;
    }
    const double np = double(pos_scores.size()), nn = double(neg_scores.size());
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double average_precision(const std::vector<double>& pos_scores,
                         const std::vector<double>& neg_scores) {
    require_both(pos_scores, neg_scores, "average_precision");
    require_finite(pos_scores, "average_precision");
    require_finite(neg_scores, "average_precision");
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.push_back({s, true});
    for (double s : neg_scores) all.push_back({s, false});
    std::stable_sort(all.begin(), all.end(),
                     [](const Entry& a, const Entry& b) { return a.score > b.score; });

    double ap = 0.0;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < all.size()) {
        std::size_t j = i, block_tp = 0, block_fp = 0;
        do {
            if (all[j].positive)
                ++block_tp;
            else
                ++block_fp;
            ++j;
        } while (j < all.size() && all[j].score == all[i].score);
        tp += block_tp;
        fp += block_fp;
        if (block_tp > 0) {
            const double precision = double(tp) / double(tp + fp);
            ap += precision * double(block_tp) / double(pos_scores.size());
        }
        i = j;
    }
    return ap;
}

namespace {

struct ClassCounts {
    std::vector<std::size_t> tp, fp, fn;
};

ClassCounts count_classes(const std::vector<std::size_t>& pred,
                          const std::vector<std::size_t>& truth, std::size_t classes,
                          const char* what) {
    require_matched(pred.size(), truth.size(), what);
    if (classes == 0) throw std::invalid_argument(std::string(what) + ": zero classes");
    ClassCounts c{std::vector<std::size_t>(classes, 0), std::vector<std::size_t>(classes, 0),
                  std::vector<std::size_t>(classes, 0)};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= classes || truth[i] >= classes) {
            throw std::invalid_argument(std::string(what) + ": label out of range at index " +
                                        std::to_string(i));
        }
        if (pred[i] == truth[i])
            ++c.tp[truth[i]];
        else {
            ++c.fp[pred[i]];
            ++c.fn[truth[i]];
        }
    }
    return c;
}

}  // namespace

double macro_f1(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                std::size_t classes) {
    const ClassCounts c = count_classes(pred, truth, classes, "macro_f1");
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double denom = double(2 * c.tp[k] + c.fp[k] + c.fn[k]);
        sum += denom == 0.0 ? 0.0 : 2.0 * double(c.tp[k]) / denom;
    }
    return sum / double(classes);
}

double macro_recall(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                    std::size_t classes) {
    const ClassCounts c = count_classes(pred, truth, classes, "macro_recall");
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double support = double(c.tp[k] + c.fn[k]);
        sum += support == 0.0 ? 0.0 : double(c.tp[k]) / support;
    }
    return sum / double(classes);
}

double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& truth) {
    require_matched(pred.size(), truth.size(), "mean_absolute_error");
    require_finite(pred, "mean_absolute_error");
    require_finite(truth, "mean_absolute_error");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
    return sum / double(pred.size());
}

double root_mean_square_error(const std::vector<double>& pred, const std::vector<double>& truth) {
    require_matched(pred.size(), truth.size(), "root_mean_square_error");
    require_finite(pred, "root_mean_square_error");
    require_finite(truth, "root_mean_square_error");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return std::sqrt(sum / double(pred.size()));
}

std::map<std::string, double> link_metrics(const std::vector<double>& pos_scores,
                                           const std::vector<double>& neg_scores) {
    return {{"auc", auc(pos_scores, neg_scores)},
            {"ap", average_precision(pos_scores, neg_scores)}};
}

std::map<std::string, double> classify_metrics(const std::vector<std::size_t>& pred,
                                               const std::vector<std::size_t>& truth,
                                               std::size_t classes) {
    return {{"macro_f1", macro_f1(pred, truth, classes)},
            {"recall", macro_recall(pred, truth, classes)}};
}

std::map<std::string, double> regress_metrics(const std::vector<double>& pred,
                                              const std::vector<double>& truth) {
    return {{"mae", mean_absolute_error(pred, truth)},
            {"rmse", root_mean_square_error(pred, truth)}};
}

}  // namespace htgl
