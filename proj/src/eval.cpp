#include "rega/eval.hpp"

#include "rega/defaults.hpp"
#include "rega/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

namespace rega {

using nlohmann::json;

std::string assemble_inference_prompt(const InferenceMode& mode,
                                      const std::string& user_input,
                                      const RolePromptSet& prompts) {
    switch (mode.kind) {
        case InferenceMode::Kind::ft:
        case InferenceMode::Kind::ftsd:
            return user_input;
        case InferenceMode::Kind::rega_central:
            return concat_role_prompt(prompts.central, user_input, prompts.separator);
        case InferenceMode::Kind::ftrp:
        case InferenceMode::Kind::rega_role: {
            auto it = prompts.roles.find(mode.domain);
            if (it == prompts.roles.end()) {
                throw ValidationError("no role prompt for domain '" + mode.domain + "'");
            }
            return concat_role_prompt(it->second, user_input, prompts.separator);
        }
    }
    return user_input;
}

// ---------------------------------------------------------------------------
// Tokenization / metrics
// ---------------------------------------------------------------------------

namespace {

// Decodes one UTF-8 code point starting at i; advances i. Invalid bytes are
// consumed one at a time and returned as-is so no input can throw here.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if ((b0 & 0x80u) == 0x00u) {
        len = 1;
        cp = b0;
    } else if ((b0 & 0xE0u) == 0xC0u) {
        len = 2;
        cp = b0 & 0x1Fu;
    } else if ((b0 & 0xF0u) == 0xE0u) {
        len = 3;
        cp = b0 & 0x0Fu;
    } else if ((b0 & 0xF8u) == 0xF0u) {
        len = 4;
        cp = b0 & 0x07u;
    }
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0u) != 0x80u) {
            len = 1;
            cp = b0;
            break;
        }
        cp = (cp << 6) | (b & 0x3Fu);
    }
    i += len;
    return cp;
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||   // unified ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||   // extension A
           (cp >= 0xF900 && cp <= 0xFAFF) ||   // compatibility ideographs
           (cp >= 0x20000 && cp <= 0x2A6DF);   // extension B
}

bool is_space_cp(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
           cp == U'\v' || cp == 0x3000; // ideographic space
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

} // namespace

std::vector<std::string> unigram_tokenize(const std::string& text, bool split_cjk_chars) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = next_codepoint(text, i);
        if (is_space_cp(cp)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else if (split_cjk_chars && is_cjk(cp)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            std::string one;
            append_utf8(one, cp);
            tokens.push_back(std::move(one));
        } else {
            append_utf8(current, cp);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double unigram_f1(const std::string& output, const std::string& gold,
                  bool split_cjk_chars) {
    const auto out_tokens = unigram_tokenize(output, split_cjk_chars);
    const auto gold_tokens = unigram_tokenize(gold, split_cjk_chars);
    if (out_tokens.empty() && gold_tokens.empty()) return 1.0;
    if (out_tokens.empty() || gold_tokens.empty()) return 0.0;

    std::unordered_map<std::string, std::size_t> gold_counts;
    for (const auto& t : gold_tokens) ++gold_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : out_tokens) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / out_tokens.size();
    const double recall = static_cast<double>(overlap) / gold_tokens.size();
    return 2.0 * precision * recall / (precision + recall);
}

std::string normalize_answer(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(b, e - b + 1);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

double accuracy(const std::vector<std::pair<std::string, std::string>>& pairs,
                const Normalizer& normalizer) {
    if (pairs.empty()) throw ValidationError("accuracy over an empty prediction list");
    std::size_t hits = 0;
    for (const auto& [output, gold] : pairs) {
        if (normalizer(output) == normalizer(gold)) ++hits;
    }
    return static_cast<double>(hits) / pairs.size();
}

// ---------------------------------------------------------------------------
// Matrix normalization
// ---------------------------------------------------------------------------

ScoreMatrix normalize_scores(const ScoreMatrix& m) {
    ScoreMatrix out = m;
    if (m.rows.empty() || m.cols.empty()) {
        out.normalized = true;
        return out;
    }
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
        double colmax = m.values[0][c];
        for (std::size_t r = 1; r < m.rows.size(); ++r) {
            colmax = std::max(colmax, m.values[r][c]);
        }
        if (!(colmax > 0.0)) {
            throw ValidationError("column '" + m.cols[c] +
                                  "' has a non-positive maximum; cannot normalize");
        }
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            out.values[r][c] = m.values[r][c] / colmax;
        }
    }
    out.normalized = true;
    return out;
}

// ---------------------------------------------------------------------------
// Judge protocol
// ---------------------------------------------------------------------------

JudgeProtocol JudgeProtocol::defaults() {
    JudgeProtocol p;
    p.template_text = default_judge_template();
    p.score_field_path = default_judge_score_path();
    return p;
}

std::string build_judge_request(const JudgeProtocol& protocol,
                                const std::string& question,
                                const std::string& answer) {
    static const std::string kQ = "{question}";
    static const std::string kA = "{answer}";
    const auto qpos = protocol.template_text.find(kQ);
    const auto apos = protocol.template_text.find(kA);
    if (qpos == std::string::npos) {
        throw ValidationError("judge template lacks the {question} placeholder");
    }
    if (apos == std::string::npos) {
        throw ValidationError("judge template lacks the {answer} placeholder");
    }
    std::string out = protocol.template_text;
    // Replace the later placeholder first so the earlier offset stays valid.
    if (qpos < apos) {
        out.replace(apos, kA.size(), answer);
        out.replace(qpos, kQ.size(), question);
    } else {
        out.replace(qpos, kQ.size(), question);
        out.replace(apos, kA.size(), answer);
    }
    return out;
}

namespace {

// Finds the first balanced {...} block, honoring strings and escapes.
std::optional<std::string> first_json_object(const std::string& text) {
    for (std::size_t start = text.find('{'); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    auto candidate = text.substr(start, i - start + 1);
                    if (json::accept(candidate)) return candidate;
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(path);
    while (std::getline(in, part, '/')) {
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

} // namespace

double parse_judge_score(const std::string& reply, const JudgeProtocol& protocol) {
    std::optional<std::string> object_text;
    if (protocol.strict_json) {
        if (json::accept(reply)) object_text = reply;
    } else {
        object_text = first_json_object(reply);
    }
    if (!object_text) {
        throw ParseError("no JSON object found in judge reply");
    }
    json j = json::parse(*object_text);
    for (const auto& key : split_path(protocol.score_field_path)) {
        if (!j.is_object() || !j.contains(key)) {
            throw ParseError("judge reply lacks field '" + protocol.score_field_path + "'");
        }
        j = j[key];
    }
    if (!j.is_number()) {
        throw ParseError("judge score at '" + protocol.score_field_path +
                         "' is not numeric");
    }
    const double score = j.get<double>();
    if (score < protocol.score_min || score > protocol.score_max) {
        throw ValidationError("judge score " + std::to_string(score) + " outside [" +
                              std::to_string(protocol.score_min) + ", " +
                              std::to_string(protocol.score_max) + "]");
    }
    return score;
}

// ---------------------------------------------------------------------------
// Registry / predictions / run evaluation
// ---------------------------------------------------------------------------

std::string to_string(Metric m) {
    switch (m) {
        case Metric::accuracy: return "accuracy";
        case Metric::unigram_f1: return "unigram_f1";
        case Metric::judge: return "judge";
    }
    return "accuracy";
}

Metric metric_from_string(const std::string& s) {
    if (s == "accuracy" || s == "acc") return Metric::accuracy;
    if (s == "unigram_f1" || s == "uf1") return Metric::unigram_f1;
    if (s == "judge") return Metric::judge;
    throw ValidationError("unknown metric '" + s + "'");
}

DatasetRegistry DatasetRegistry::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.contains("datasets") || !j["datasets"].is_object()) {
        throw ValidationError(path.string() + ": registry needs a \"datasets\" object");
    }
    DatasetRegistry reg;
    for (const auto& [name, info] : j["datasets"].items()) {
        DatasetInfo d;
        d.domain = info.value("domain", std::string{"general"});
        d.metric = metric_from_string(info.value("metric", std::string{"accuracy"}));
        reg.datasets[name] = std::move(d);
    }
    return reg;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const std::string at = path.filename().string() + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(at + ": malformed JSON: " + e.what());
        }
        PredictionRecord r;
        for (const char* f : {"dataset", "output", "gold"}) {
            if (!j.contains(f)) throw ParseError(at + ": missing \"" + std::string(f) + "\"");
        }
        r.dataset = j["dataset"].get<std::string>();
        r.domain = j.value("domain", std::string{});
        r.strategy = j.value("strategy", std::string{"default"});
        r.input = j.value("input", std::string{});
        r.output = j["output"].get<std::string>();
        r.gold = j["gold"].get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

ExperimentReport evaluate_run(const std::vector<PredictionRecord>& predictions,
                              const DatasetRegistry& registry,
                              const EvaluateOptions& options) {
    // Keyed by (strategy, dataset) in first-appearance order.
    std::vector<std::string> strategies;
    std::vector<std::string> datasets;
    std::map<std::pair<std::string, std::string>, std::vector<const PredictionRecord*>>
        groups;
    for (const auto& r : predictions) {
        auto it = registry.datasets.find(r.dataset);
        if (it == registry.datasets.end()) {
            throw ValidationError("dataset '" + r.dataset + "' is not registered");
        }
        if (std::find(strategies.begin(), strategies.end(), r.strategy) ==
            strategies.end()) {
            strategies.push_back(r.strategy);
        }
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) {
            datasets.push_back(r.dataset);
        }
        groups[{r.strategy, r.dataset}].push_back(&r);
    }

    ExperimentReport report;
    for (const auto& [key, records] : groups) {
        const auto& [strategy, dataset] = key;
        const auto& info = registry.datasets.at(dataset);
        double score = 0.0;
        switch (info.metric) {
            case Metric::accuracy: {
                std::vector<std::pair<std::string, std::string>> pairs;
                pairs.reserve(records.size());
                for (const auto* r : records) pairs.emplace_back(r->output, r->gold);
                score = accuracy(pairs, options.normalizer);
                break;
            }
            case Metric::unigram_f1: {
                double sum = 0.0;
                for (const auto* r : records) {
                    sum += unigram_f1(r->output, r->gold, options.split_cjk_chars);
                }
                score = records.empty() ? 0.0 : sum / records.size();
                break;
            }
            case Metric::judge: {
                if (!options.judge_client) continue; // judged scores are optional
                GenerationParams params;
                params.model_name = options.judge.judge_model;
                if (options.judge.greedy) {
                    params.temperature = 0.0;
                    params.top_p = 1.0;
                }
                double sum = 0.0;
                for (const auto* r : records) {
                    const auto request =
                        build_judge_request(options.judge, r->input, r->output);
                    const auto reply = options.judge_client->generate(request, params);
                    sum += parse_judge_score(reply, options.judge);
                }
                score = records.empty() ? 0.0 : sum / records.size();
                break;
            }
        }
        report.per_dataset[strategy][dataset] = score;
    }

    // Per-domain macro averages plus the judge-based general score.
    for (const auto& [strategy, scores] : report.per_dataset) {
        std::map<std::string, std::pair<double, std::size_t>> acc;
        double judge_sum = 0.0;
        std::size_t judge_n = 0;
        for (const auto& [dataset, score] : scores) {
            const auto& info = registry.datasets.at(dataset);
            if (info.metric == Metric::judge) {
                judge_sum += score;
                ++judge_n;
                continue;
            }
            auto& slot = acc[info.domain];
            slot.first += score;
            ++slot.second;
        }
        for (const auto& [domain, sum_n] : acc) {
            report.per_domain[strategy][domain] = sum_n.first / sum_n.second;
        }
        if (judge_n > 0) report.general_score[strategy] = judge_sum / judge_n;
    }

    // Matrix rows/cols in first-appearance order; missing cells are 0.
    report.matrix.rows = strategies;
    report.matrix.cols = datasets;
    report.matrix.values.assign(strategies.size(),
                                std::vector<double>(datasets.size(), 0.0));
    for (std::size_t r = 0; r < strategies.size(); ++r) {
        for (std::size_t c = 0; c < datasets.size(); ++c) {
            const auto sit = report.per_dataset.find(strategies[r]);
            if (sit == report.per_dataset.end()) continue;
            const auto dit = sit->second.find(datasets[c]);
            if (dit != sit->second.end()) report.matrix.values[r][c] = dit->second;
        }
    }
    if (options.normalize_matrix) report.matrix = normalize_scores(report.matrix);
    return report;
}

namespace {

json matrix_to_json(const ScoreMatrix& m) {
    return json{{"rows", m.rows},
                {"cols", m.cols},
                {"values", m.values},
                {"normalized", m.normalized}};
}

ScoreMatrix matrix_from_json(const json& j) {
    ScoreMatrix m;
    m.rows = j.at("rows").get<std::vector<std::string>>();
    m.cols = j.at("cols").get<std::vector<std::string>>();
    m.values = j.at("values").get<std::vector<std::vector<double>>>();
    m.normalized = j.at("normalized").get<bool>();
    return m;
}

} // namespace

std::string ExperimentReport::to_json_string(int indent) const {
    json j;
    j["per_dataset"] = per_dataset;
    j["per_domain"] = per_domain;
    j["general_score"] = general_score;
    j["matrix"] = matrix_to_json(matrix);
    return j.dump(indent);
}

ExperimentReport ExperimentReport::from_json_string(const std::string& text) {
    json j = json::parse(text);
    ExperimentReport r;
    r.per_dataset =
        j.at("per_dataset").get<std::map<std::string, std::map<std::string, double>>>();
    r.per_domain =
        j.at("per_domain").get<std::map<std::string, std::map<std::string, double>>>();
    r.general_score = j.at("general_score").get<std::map<std::string, double>>();
    r.matrix = matrix_from_json(j.at("matrix"));
    return r;
}

void write_matrix_csv(const ScoreMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "strategy";
    for (const auto& c : m.cols) out << ',' << c;
    out << '\n';
    out.precision(17);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        out << m.rows[r];
        for (std::size_t c = 0; c < m.cols.size(); ++c) out << ',' << m.values[r][c];
        out << '\n';
    }
}

} // namespace rega
