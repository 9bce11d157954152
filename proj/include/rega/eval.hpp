#pragma once

#include "rega/corpus.hpp"
#include "rega/distill.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rega {

// ---------------------------------------------------------------------------
// Inference prompt assembly
// ---------------------------------------------------------------------------

// Strategy-correct prompt selection for a user input x_u. REGA always infers
// under the central prompt; FTRP and REGA-role need the input's domain.
struct InferenceMode {
    enum class Kind { ft, ftsd, ftrp, rega_central, rega_role };
    Kind kind = Kind::ft;
    std::string domain; // ftrp / rega_role only

    static InferenceMode ft() { return {Kind::ft, {}}; }
    static InferenceMode ftsd() { return {Kind::ftsd, {}}; }
    static InferenceMode ftrp(std::string d) { return {Kind::ftrp, std::move(d)}; }
    static InferenceMode rega_central() { return {Kind::rega_central, {}}; }
    static InferenceMode rega_role(std::string d) { return {Kind::rega_role, std::move(d)}; }
};

std::string assemble_inference_prompt(const InferenceMode& mode,
                                      const std::string& user_input,
                                      const RolePromptSet& prompts);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Whitespace tokenizer; contiguous CJK runs split into single characters.
std::vector<std::string> unigram_tokenize(const std::string& text,
                                          bool split_cjk_chars = true);

// Harmonic mean of unigram precision/recall over token multisets. Both sides
// empty -> 1, exactly one empty -> 0.
double unigram_f1(const std::string& output, const std::string& gold,
                  bool split_cjk_chars = true);

using Normalizer = std::function<std::string(const std::string&)>;

// Trims surrounding whitespace and case-folds ASCII.
std::string normalize_answer(const std::string& s);

// Fraction of pairs whose normalized output equals the normalized gold.
// Throws on an empty list.
double accuracy(const std::vector<std::pair<std::string, std::string>>& pairs,
                const Normalizer& normalizer = normalize_answer);

// ---------------------------------------------------------------------------
// Score matrices
// ---------------------------------------------------------------------------

struct ScoreMatrix {
    std::vector<std::string> rows; // strategies
    std::vector<std::string> cols; // datasets
    std::vector<std::vector<double>> values;
    bool normalized = false;
};

// Divides every column by its maximum. Demands strictly positive column
// maxima; idempotent and argmax-preserving.
ScoreMatrix normalize_scores(const ScoreMatrix& m);

// ---------------------------------------------------------------------------
// LLM-as-judge
// ---------------------------------------------------------------------------

struct JudgeProtocol {
    std::string template_text;           // must contain {question} and {answer}
    std::string score_field_path;        // e.g. "助手/评分"
    double score_min = 0.0;
    double score_max = 10.0;
    std::string judge_model = "gpt-4-0613";
    bool greedy = true;                  // temperature 0 when querying
    bool strict_json = false;            // disable fence/prose stripping

    static JudgeProtocol defaults();
};

// Substitutes {question}/{answer}; everything else byte-identical.
std::string build_judge_request(const JudgeProtocol& protocol,
                                const std::string& question,
                                const std::string& answer);

// Extracts the first well-formed JSON object from the reply (stripping code
// fences and surrounding prose unless strict), follows score_field_path, and
// range-checks the number. Out of range is an error, not a clamp.
double parse_judge_score(const std::string& reply, const JudgeProtocol& protocol);

// ---------------------------------------------------------------------------
// Run evaluation
// ---------------------------------------------------------------------------

enum class Metric { accuracy, unigram_f1, judge };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct DatasetInfo {
    std::string domain;
    Metric metric = Metric::accuracy;
};

// dataset name -> domain + metric, mirrored from a JSON config.
struct DatasetRegistry {
    std::map<std::string, DatasetInfo> datasets;

    static DatasetRegistry load(const std::filesystem::path& path);
};

struct PredictionRecord {
    std::string dataset;
    std::string domain;
    std::string strategy;
    std::string input;
    std::string output;
    std::string gold;
};

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

struct ExperimentReport {
    // strategy -> dataset -> score
    std::map<std::string, std::map<std::string, double>> per_dataset;
    // strategy -> domain -> macro average over the domain's datasets
    std::map<std::string, std::map<std::string, double>> per_domain;
    // strategy -> mean judge score over judge-metric datasets
    std::map<std::string, double> general_score;
    ScoreMatrix matrix;

    std::string to_json_string(int indent = 2) const;
    static ExperimentReport from_json_string(const std::string& text);
};

struct EvaluateOptions {
    Normalizer normalizer = normalize_answer;
    bool split_cjk_chars = true;
    bool normalize_matrix = false;
    // When present, judge-metric datasets are scored by querying this client;
    // otherwise they are skipped.
    GenerationClient* judge_client = nullptr;
    JudgeProtocol judge = JudgeProtocol::defaults();
};

ExperimentReport evaluate_run(const std::vector<PredictionRecord>& predictions,
                              const DatasetRegistry& registry,
                              const EvaluateOptions& options = {});

void write_matrix_csv(const ScoreMatrix& m, const std::filesystem::path& path);

} // namespace rega
