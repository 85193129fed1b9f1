#pragma once

#include "ussl/losses.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

/// One evaluation-interval record. JSON-lines keys, in order:
///   step, lr, l_s, l_ua, l_ue, total, alpha_ua, alpha_ue, lambda, masked_fraction,
///   pseudo_label_accuracy, pseudo_label_coverage, val_accuracy, test_accuracy,
///   cert_score_labeled, cert_score_unlabeled
/// Accuracies are measured on the EMA model; null marks an undefined value
/// (no validation set, or no pseudo label above the threshold).
struct EvalRecord {
    std::size_t step = 0;
    double lr = 0.0;
    LossBreakdown loss;  // last step of the interval; masked_fraction is the interval mean
    std::optional<double> pseudo_label_accuracy;
    double pseudo_label_coverage = 0.0;
    std::optional<double> val_accuracy;
    std::optional<double> test_accuracy;
    double cert_score_labeled = 0.0;
    double cert_score_unlabeled = 0.0;

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

namespace history_detail {

inline nlohmann::ordered_json opt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace history_detail

inline std::string to_json_line(const EvalRecord& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["lr"] = r.lr;
    j["l_s"] = r.loss.l_s;
    j["l_ua"] = r.loss.l_ua;
    j["l_ue"] = r.loss.l_ue;
    j["total"] = r.loss.total;
    j["alpha_ua"] = r.loss.alpha_ua;
    j["alpha_ue"] = r.loss.alpha_ue;
    j["lambda"] = r.loss.lambda;
    j["masked_fraction"] = r.loss.masked_fraction;
    j["pseudo_label_accuracy"] = history_detail::opt(r.pseudo_label_accuracy);
    j["pseudo_label_coverage"] = r.pseudo_label_coverage;
    j["val_accuracy"] = history_detail::opt(r.val_accuracy);
    j["test_accuracy"] = history_detail::opt(r.test_accuracy);
    j["cert_score_labeled"] = r.cert_score_labeled;
    j["cert_score_unlabeled"] = r.cert_score_unlabeled;
    return j.dump();
}

inline EvalRecord from_json_line(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    EvalRecord r;
    r.step = j.at("step").get<std::size_t>();
    r.lr = j.at("lr").get<double>();
    r.loss.l_s = j.at("l_s").get<double>();
    r.loss.l_ua = j.at("l_ua").get<double>();
    r.loss.l_ue = j.at("l_ue").get<double>();
    r.loss.total = j.at("total").get<double>();
    r.loss.alpha_ua = j.at("alpha_ua").get<double>();
    r.loss.alpha_ue = j.at("alpha_ue").get<double>();
    r.loss.lambda = j.at("lambda").get<double>();
    r.loss.masked_fraction = j.at("masked_fraction").get<double>();
    r.pseudo_label_accuracy = history_detail::get_opt(j, "pseudo_label_accuracy");
    r.pseudo_label_coverage = j.at("pseudo_label_coverage").get<double>();
    r.val_accuracy = history_detail::get_opt(j, "val_accuracy");
    r.test_accuracy = history_detail::get_opt(j, "test_accuracy");
    r.cert_score_labeled = j.at("cert_score_labeled").get<double>();
    r.cert_score_unlabeled = j.at("cert_score_unlabeled").get<double>();
    return r;
}

class RunHistory {
public:
    /// Steps must be strictly increasing.
    void append(EvalRecord r) {
        if (!records_.empty() && r.step <= records_.back().step) {
            throw std::logic_error("RunHistory: step " + std::to_string(r.step) + " does not follow step " +
                                   std::to_string(records_.back().step));
        }
        records_.push_back(std::move(r));
    }

    [[nodiscard]] const std::vector<EvalRecord>& records() const { return records_; }
    [[nodiscard]] bool empty() const { return records_.empty(); }
    [[nodiscard]] std::size_t size() const { return records_.size(); }

    [[nodiscard]] std::string to_jsonl() const {
        std::string out;
        for (const auto& r : records_) out += to_json_line(r) + "\n";
        return out;
    }

    static RunHistory from_jsonl(const std::string& text) {
        RunHistory h;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) h.append(from_json_line(line));
        return h;
    }

    static RunHistory load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open history file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return from_jsonl(ss.str());
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write history file '" + path + "'");
        out << to_jsonl();
    }

    friend bool operator==(const RunHistory&, const RunHistory&) = default;

private:
    std::vector<EvalRecord> records_;
};

}  // namespace ussl
