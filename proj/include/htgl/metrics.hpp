#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace htgl {

/// Probability a positive outranks a negative, ties at half credit, computed
/// by the midrank statistic. Throws when either class is empty.
double auc(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores);

/// Precision-recall step integration over descending score thresholds; tied
/// scores move as one block. Throws when either class is empty.
double average_precision(const std::vector<double>& pos_scores,
                         const std::vector<double>& neg_scores);

/// Unweighted mean of per-class F1 over all `classes`; a class with no
/// support and no predictions contributes zero.
double macro_f1(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                std::size_t classes);

/// Unweighted mean of per-class recall; an absent class contributes zero.
double macro_recall(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                    std::size_t classes);

double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& truth);
double root_mean_square_error(const std::vector<double>& pred, const std::vector<double>& truth);

std::map<std::string, double> link_metrics(const std::vector<double>& pos_scores,
                                           const std::vector<double>& neg_scores);
std::map<std::string, double> classify_metrics(const std::vector<std::size_t>& pred,
                                               const std::vector<std::size_t>& truth,
                                               std::size_t classes);
std::map<std::string, double> regress_metrics(const std::vector<double>& pred,
                                              const std::vector<double>& truth);

}  // namespace htgl
