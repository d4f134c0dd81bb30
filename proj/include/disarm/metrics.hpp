#pragma once

#include <map>
#include <string>
#include <vector>

#include "disarm/common.hpp"

// Macro-averaged evaluation over {not-harmful, harmful} with the 0/0 := 0
// convention for empty denominators. Macro-F1 is the mean of the per-class
// F1 scores (each the harmonic mean of that class's precision and recall).

namespace disarm::train {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Confusion {
    long tp = 0;  // harmful predicted harmful
    long fp = 0;
    long fn = 0;
    long tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

struct EvalReport {
    std::string scenario;  // A | B | C | validation | pooled
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    ClassMetrics not_harmful;
    ClassMetrics harmful;
    Confusion counts;
};

double f1_score(double precision, double recall);

EvalReport report_from_confusion(const Confusion& counts, const std::string& scenario);

EvalReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                           const std::string& scenario = "pooled");

// Macro means straight from per-class precision/recall pairs.
struct MacroScores {
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

MacroScores macro_from_per_class(double precision_not_harmful, double recall_not_harmful,
                                 double precision_harmful, double recall_harmful);

std::string report_to_json_string(const EvalReport& r);
EvalReport report_from_json_string(const std::string& s);

// One row per report: Acc Prec Rec F1 plus per-class P/R, 4 decimals.
std::string format_report_table(const std::vector<EvalReport>& reports);

}  // namespace disarm::train
