#include "hazardtm/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hazardtm/csv.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/text.hpp"

namespace hazardtm::eval {

std::string_view to_string(Prominence p) {
    switch (p) {
        case Prominence::Main: return "main";
        case Prominence::Mention: return "mention";
        case Prominence::None: return "none";
    }
    return "none";
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Prominence prominence_from_string(std::string_view s) {
    if (s == "main") return Prominence::Main;
    if (s == "mention") return Prominence::Mention;
    if (s == "none") return Prominence::None;
    throw Error(ErrorCode::ParseError, "unknown prominence '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw Error(ErrorCode::ParseError, "unknown split '" + std::string(s) + "'");
}

namespace {

std::string at_line(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line) + ": "; }

int parse_label(const std::string& s, const std::string& where) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw Error(ErrorCode::ParseError, where + "label must be 0 or 1, got '" + s + "'");
}

}  // namespace

std::vector<GoldLabel> read_gold_csv(const std::string& path) {
    const auto rows = csv::read_file(path);
    const std::vector<std::string> header{"doc_id", "relevant", "prominence", "hazard", "split"};
    if (rows.empty() || rows.front().fields != header) {
        throw Error(ErrorCode::ParseError, path + ": expected header doc_id,relevant,prominence,hazard,split");
    }
    std::vector<GoldLabel> out;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        const auto where = at_line(path, rows[i].line);
        if (f.size() != header.size()) throw Error(ErrorCode::ParseError, where + "expected 5 fields");
        GoldLabel g;
        g.doc_id = f[0];
        g.relevant = parse_label(f[1], where);
        try {
            g.prominence = prominence_from_string(f[2]);
            g.split = split_from_string(f[4]);
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError, where + e.what());
        }
        g.hazard = f[3];
        if ((g.prominence == Prominence::None) != (g.relevant == 0)) {
            throw Error(ErrorCode::ParseError, where + "prominence must be none exactly when relevant is 0");
        }
        if (!seen.insert(g.doc_id).second) throw Error(ErrorCode::DuplicateId, where + "duplicate id " + g.doc_id);
        out.push_back(std::move(g));
    }
    return out;
}

void write_gold_csv(const std::string& path, std::span<const GoldLabel> gold) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, {"doc_id", "relevant", "prominence", "hazard", "split"});
    for (const auto& g : gold) {
        csv::write_row(out, {g.doc_id, std::to_string(g.relevant), std::string(to_string(g.prominence)), g.hazard,
                             std::string(to_string(g.split))});
    }
}

std::map<std::string, int> labels_for(std::span<const GoldLabel> gold, Split split) {
    std::map<std::string, int> out;
    for (const auto& g : gold) {
        if (g.split == split) out.emplace(g.doc_id, g.relevant);
    }
    return out;
}

namespace {

void tally(Scores& s, const GoldLabel& g, int predicted) {
    s.counts.add(g.relevant == 1, predicted == 1);
    if (g.prominence == Prominence::Main) {
        ++s.n_main;
        if (predicted == 1) ++s.n_main_correct;
    }
}

void finish(Scores& s) { s.metrics = compute_metrics(s.counts); }

}  // namespace

EvalReport evaluate(const PredictionSet& pred, std::span<const GoldLabel> gold, Split split) {
    EvalReport report;
    report.source = pred.source;
    report.split = split;
    std::vector<std::string> missing;
    for (const auto& g : gold) {
        if (g.split != split) continue;
        auto it = pred.predictions.find(g.doc_id);
        if (it == pred.predictions.end()) {
            missing.push_back(g.doc_id);
            continue;
        }
        tally(report.overall, g, it->second);
        tally(report.per_hazard[g.hazard], g, it->second);
    }
    if (!missing.empty()) {
        const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
        std::string msg = std::to_string(missing.size()) + " gold documents lack a prediction: " +
                          text::join({missing.begin(), missing.begin() + static_cast<std::ptrdiff_t>(shown)}, ", ");
        if (shown < missing.size()) msg += ", ...";
        throw Error(ErrorCode::MissingPrediction, msg);
    }
    finish(report.overall);
    for (auto& [h, s] : report.per_hazard) finish(s);
    return report;
}

EvalReport baseline(std::span<const GoldLabel> gold, Split split) {
    PredictionSet all_ones;
    all_ones.source = "baseline";
    for (const auto& g : gold) {
        if (g.split == split) all_ones.predictions[g.doc_id] = 1;
    }
    if (all_ones.predictions.empty()) {
        throw Error(ErrorCode::ConfigError, "split '" + std::string(to_string(split)) + "' has no gold documents");
    }
    return evaluate(all_ones, gold, split);
}

Agreement cohen_kappa(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
    if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin(),
                                            [](const auto& x, const auto& y) { return x.first == y.first; })) {
        throw Error(ErrorCode::IdSetMismatch, "label sets cover different documents");
    }
    if (a.empty()) throw Error(ErrorCode::IdSetMismatch, "label sets are empty");
    double n = static_cast<double>(a.size());
    double same = 0.0;
    double a1 = 0.0;
    double b1 = 0.0;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (ia->second == ib->second) same += 1.0;
        if (ia->second == 1) a1 += 1.0;
        if (ib->second == 1) b1 += 1.0;
    }
    const double p_o = same / n;
    const double p_e = (a1 / n) * (b1 / n) + ((n - a1) / n) * ((n - b1) / n);
    if (p_e >= 1.0) throw Error(ErrorCode::DegenerateMarginals, "chance agreement is 1; kappa undefined");
    return {p_o, (p_o - p_e) / (1.0 - p_e)};
}

PredictionSet majority_vote(const PredictionSet& a, const PredictionSet& b, const PredictionSet& c) {
    auto same_ids = [](const PredictionSet& x, const PredictionSet& y) {
        return x.predictions.size() == y.predictions.size() &&
               std::equal(x.predictions.begin(), x.predictions.end(), y.predictions.begin(),
                          [](const auto& p, const auto& q) { return p.first == q.first; });
    };
    if (!same_ids(a, b) || !same_ids(a, c)) {
        throw Error(ErrorCode::IdSetMismatch, "prediction sets cover different documents");
    }
    PredictionSet out;
    out.source = "majority";
    auto ib = b.predictions.begin();
    auto ic = c.predictions.begin();
    for (const auto& [id, label] : a.predictions) {
        const int votes = (label == 1) + (ib->second == 1) + (ic->second == 1);
        out.predictions.emplace_hint(out.predictions.end(), id, votes >= 2 ? 1 : 0);
        ++ib;
        ++ic;
    }
    return out;
}

PredictionSet majority_vote(std::span<const PredictionSet> preds) {
    if (preds.size() != 3) {
        throw Error(ErrorCode::ConfigError, "majority vote needs exactly 3 prediction sets, got " +
                                                std::to_string(preds.size()));
    }
    return majority_vote(preds[0], preds[1], preds[2]);
}

PredictionSet import_external(const std::string& path, std::string source) {
    const auto rows = csv::read_file(path);
    if (rows.empty() || rows.front().fields.size() < 2 || rows.front().fields[0] != "doc_id" ||
        rows.front().fields[1] != "label") {
        throw Error(ErrorCode::ParseError, at_line(path, 1) + "expected header doc_id,label");
    }
    const bool has_expl = rows.front().fields.size() >= 3;
    PredictionSet out;
    out.source = std::move(source);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        const auto where = at_line(path, rows[i].line);
        if (f.size() != rows.front().fields.size()) throw Error(ErrorCode::ParseError, where + "wrong field count");
        const int label = parse_label(f[1], where);
        if (!out.predictions.emplace(f[0], label).second) {
            throw Error(ErrorCode::DuplicateId, where + "duplicate id " + f[0]);
        }
        if (has_expl && !f[2].empty()) {
            std::vector<std::size_t> topics;
            for (const auto& part : text::split(f[2], ';')) {
                std::size_t t = 0;
                auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), t);
                if (ec != std::errc{} || ptr != part.data() + part.size()) {
                    throw Error(ErrorCode::ParseError, where + "bad topic id '" + part + "'");
                }
                topics.push_back(t);
            }
            out.explanations.emplace(f[0], std::move(topics));
        }
    }
    return out;
}

void write_predictions_csv(const std::string& path, const PredictionSet& pred) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, {"doc_id", "label", "explanation"});
    for (const auto& [id, label] : pred.predictions) {
        std::vector<std::string> topics;
        if (auto it = pred.explanations.find(id); it != pred.explanations.end()) {
            for (auto t : it->second) topics.push_back(std::to_string(t));
        }
        csv::write_row(out, {id, std::to_string(label), text::join(topics, ";")});
    }
}

namespace {

nlohmann::json scores_json(const Scores& s) {
    return {{"tp", s.counts.tp},
            {"fp", s.counts.fp},
            {"fn", s.counts.fn},
            {"tn", s.counts.tn},
            {"precision", s.metrics.precision},
            {"recall", s.metrics.recall},
            {"f1", s.metrics.f1},
            {"degenerate", s.metrics.degenerate()},
            {"n_main", s.n_main},
            {"n_main_correct", s.n_main_correct}};
}

std::string fixed3(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j = scores_json(report.overall);
    j["source"] = report.source;
    j["split"] = to_string(report.split);
    j["per_hazard"] = nlohmann::json::object();
    for (const auto& [h, s] : report.per_hazard) j["per_hazard"][h] = scores_json(s);
    return j;
}

std::string render_text(std::span<const EvalReport> reports) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-12s %-6s %9s %9s %9s %6s %6s %6s %6s %10s\n", "source", "hazard",
                  "split", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "main_hits");
    out << line;
    auto row = [&](const EvalReport& r, const std::string& hazard, const Scores& s) {
        const std::string main_hits = std::to_string(s.n_main_correct) + "/" + std::to_string(s.n_main);
        std::snprintf(line, sizeof line, "%-16s %-12s %-6s %9s %9s %9s %6zu %6zu %6zu %6zu %10s%s\n",
                      r.source.c_str(), hazard.c_str(), std::string(to_string(r.split)).c_str(),
                      fixed3(s.metrics.precision).c_str(), fixed3(s.metrics.recall).c_str(),
                      fixed3(s.metrics.f1).c_str(), s.counts.tp, s.counts.fp, s.counts.fn, s.counts.tn,
                      main_hits.c_str(), s.metrics.degenerate() ? "  (degenerate)" : "");
        out << line;
    };
    for (const auto& r : reports) {
        row(r, "all", r.overall);
        if (r.per_hazard.size() > 1) {
            for (const auto& [h, s] : r.per_hazard) row(r, h, s);
        }
    }
    return out.str();
}

void write_theta_curve_csv(const std::string& path, std::span<const classifier::DocumentTopics> docs,
                           std::size_t topic, const std::map<std::string, int>& gold) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, {"doc_id", "topic_probability", "gold_label"});
    for (const auto& d : docs) {
        if (topic >= d.topics.probs.size()) {
            throw Error(ErrorCode::ConfigError, "topic " + std::to_string(topic) + " out of range");
        }
        auto it = gold.find(d.doc_id);
        char prob[40];
        std::snprintf(prob, sizeof prob, "%.17g", d.topics.probs[topic]);
        csv::write_row(out, {d.doc_id, prob, it == gold.end() ? "" : std::to_string(it->second)});
    }
}

}  // namespace hazardtm::eval
