#include "disarm/metrics.hpp"

#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace disarm::train {

using nlohmann::json;

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double f1_score(double precision, double recall) {
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

EvalReport report_from_confusion(const Confusion& c, const std::string& scenario) {
    EvalReport r;
    r.scenario = scenario;
    r.counts = c;
    r.harmful.precision = safe_div(c.tp, c.tp + c.fp);
    r.harmful.recall = safe_div(c.tp, c.tp + c.fn);
    r.harmful.f1 = f1_score(r.harmful.precision, r.harmful.recall);
    r.not_harmful.precision = safe_div(c.tn, c.tn + c.fn);
    r.not_harmful.recall = safe_div(c.tn, c.tn + c.fp);
    r.not_harmful.f1 = f1_score(r.not_harmful.precision, r.not_harmful.recall);
    r.accuracy = safe_div(c.tp + c.tn, c.total());
    r.macro_precision = 0.5 * (r.not_harmful.precision + r.harmful.precision);
    r.macro_recall = 0.5 * (r.not_harmful.recall + r.harmful.recall);
    r.macro_f1 = 0.5 * (r.not_harmful.f1 + r.harmful.f1);
    return r;
}

EvalReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                           const std::string& scenario) {
    if (predictions.size() != labels.size())
        throw DimensionError("compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(labels.size()) + " labels");
    if (predictions.empty()) throw ContractError("compute_metrics: empty input");
    Confusion c;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const bool pred = predictions[i] != 0;
        const bool truth = labels[i] != 0;
        if (pred && truth)
            ++c.tp;
        else if (pred && !truth)
            ++c.fp;
        else if (!pred && truth)
            ++c.fn;
        else
            ++c.tn;
    }
    return report_from_confusion(c, scenario);
}

MacroScores macro_from_per_class(double precision_not_harmful, double recall_not_harmful,
                                 double precision_harmful, double recall_harmful) {
    MacroScores m;
    m.macro_precision = 0.5 * (precision_not_harmful + precision_harmful);
    m.macro_recall = 0.5 * (recall_not_harmful + recall_harmful);
    m.macro_f1 = 0.5 * (f1_score(precision_not_harmful, recall_not_harmful) +
                        f1_score(precision_harmful, recall_harmful));
    return m;
}

namespace {

json report_to_json(const EvalReport& r) {
    return json{{"scenario", r.scenario},
                {"accuracy", r.accuracy},
                {"macro_precision", r.macro_precision},
                {"macro_recall", r.macro_recall},
                {"macro_f1", r.macro_f1},
                {"per_class",
                 {{"not_harmful",
                   {{"precision", r.not_harmful.precision}, {"recall", r.not_harmful.recall}, {"f1", r.not_harmful.f1}}},
                  {"harmful",
                   {{"precision", r.harmful.precision}, {"recall", r.harmful.recall}, {"f1", r.harmful.f1}}}}},
                {"counts",
                 {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}}};
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    const auto& nh = j.at("per_class").at("not_harmful");
    const auto& h = j.at("per_class").at("harmful");
    r.not_harmful = {nh.at("precision").get<double>(), nh.at("recall").get<double>(), nh.at("f1").get<double>()};
    r.harmful = {h.at("precision").get<double>(), h.at("recall").get<double>(), h.at("f1").get<double>()};
    const auto& c = j.at("counts");
    r.counts = {c.at("tp").get<long>(), c.at("fp").get<long>(), c.at("fn").get<long>(), c.at("tn").get<long>()};
    return r;
}

}  // namespace

std::string report_to_json_string(const EvalReport& r) { return report_to_json(r).dump(); }

EvalReport report_from_json_string(const std::string& s) { return report_from_json(json::parse(s)); }

std::string format_report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "Scenario" << std::right;
    for (const char* col : {"Acc", "Prec", "Rec", "F1", "NH-P", "NH-R", "H-P", "H-R"})
        out << std::setw(9) << col;
    out << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& r : reports) {
        out << std::left << std::setw(12) << r.scenario << std::right;
        for (double v : {r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1, r.not_harmful.precision,
                         r.not_harmful.recall, r.harmful.precision, r.harmful.recall})
            out << std::setw(9) << v;
        out << "\n";
    }
    return out.str();
}

}  // namespace disarm::train
