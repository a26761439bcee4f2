#pragma once

#include "biq/calibrate.hpp"
#include "biq/dataset.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace biq {

// N datasets by k methods matrix of mean accuracies. Rank 1 is the best
// accuracy within a row.
struct ScoreTable {
    std::vector<std::string> datasets;
    std::vector<std::string> methods;
    Matrix scores;

    Index n_datasets() const { return scores.rows(); }
    Index n_methods() const { return scores.cols(); }
};

void write_score_table(const ScoreTable& table, std::ostream& out);
ScoreTable read_score_table(std::istream& in);

enum class PairOutcome { win, tie, loss };

struct TestOutcome {
    double statistic = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    // Friedman and Nemenyi: per-method average ranks (1 = best).
    Vector avg_ranks;
    // Nemenyi: minimum rank gap for significance and the maximal groups of
    // method indices within one CD of each other, sorted by rank.
    double critical_difference = 0.0;
    std::vector<std::vector<int>> groups;
    // Wilcoxon: win means the first series ranks higher.
    PairOutcome outcome = PairOutcome::tie;
    int zeros_dropped = 0;
    bool exact = false;
    std::vector<std::string> warnings;
};

double accuracy(const CalibratedModel& model, const Dataset& test);

// Average ranks over the table rows (ties share the mean rank) ranked into
// chi-square statistic 12N/(k(k+1)) * (sum R_j^2 - k(k+1)^2/4) with k-1
// degrees of freedom. Requires k >= 3.
TestOutcome friedman(const ScoreTable& table, double alpha = 0.05);

// CD = q_alpha(k) * sqrt(k(k+1)/(6N)) with the embedded two-tailed critical
// values for k in [2, 10] at alpha = 0.05.
TestOutcome nemenyi(const ScoreTable& table, double alpha = 0.05);

// Signed-rank test on paired series: zero differences dropped, tied
// magnitudes share average ranks, exact enumeration of sign assignments for
// m <= 12, normal approximation with tie correction beyond.
TestOutcome wilcoxon_signed_rank(const Vector& a, const Vector& b, double alpha = 0.05);

// Upper-tail chi-square probability P(X >= x) with nu degrees of freedom.
double chi_square_survival(double x, double nu);

}  // namespace biq
