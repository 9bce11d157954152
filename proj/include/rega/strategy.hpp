#pragma once

#include "rega/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rega {

enum class Strategy { ft, ftsd, ftrp, rega };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Fraction r = |D_i'| / |D_i| of each domain reused under the central prompt.
struct MixingRatio {
    double value = 0.1;

    void validate() const;
};

// Everything a corpus build needs. FTSD and REGA require `general`; FTRP and
// REGA require `prompts`; REGA requires `mixing_ratio`.
struct CorpusSpec {
    Strategy strategy = Strategy::ft;
    std::vector<DomainDataset> domains;
    std::optional<DomainDataset> general;
    std::optional<RolePromptSet> prompts;
    std::optional<MixingRatio> mixing_ratio;
    std::uint64_t seed = 0;

    void validate() const;
};

// domain -> prompt-kind string -> count
using Composition = std::map<std::string, std::map<std::string, std::size_t>>;

struct TrainingCorpus {
    Strategy strategy = Strategy::ft;
    std::uint64_t seed = 0;
    std::vector<RenderedRecord> records;
    Composition composition;
    std::filesystem::path persisted_path; // set by write_corpus
};

// floor(r*m), except a non-empty sub-dataset contributes at least one sample
// whenever r > 0.
std::size_t subset_size(double r, std::size_t m);

// Per-sub-dataset stratified sampling without replacement. Each sub-dataset
// stream is keyed by (seed, domain/sub-dataset name), and the subset is the
// prefix of a seeded permutation, so subsets nest as r grows and adding a
// domain never perturbs another domain's pick.
DomainDataset sample_subset(const DomainDataset& dataset, MixingRatio r,
                            std::uint64_t seed);

TrainingCorpus build_ft(const CorpusSpec& spec);
TrainingCorpus build_ftsd(const CorpusSpec& spec);
TrainingCorpus build_ftrp(const CorpusSpec& spec);
TrainingCorpus build_rega(const CorpusSpec& spec);
TrainingCorpus build_corpus(const CorpusSpec& spec);

struct CorpusStats {
    Composition composition;
    std::size_t total = 0;
    // Occurrences beyond the first per (source domain, sample id).
    std::size_t duplicates = 0;
};

CorpusStats corpus_stats(const std::vector<RenderedRecord>& records);

// Writes the corpus as JSON Lines and remembers the path for export_recipe.
void write_corpus(TrainingCorpus& corpus, const std::filesystem::path& path);

struct RecipeOverrides {
    std::optional<int> adapter_rank;
    std::optional<int> adapter_alpha;
    std::optional<int> batch_size;
    std::optional<int> max_epochs;
    std::optional<int> eval_checkpoint_epoch;
};

// Adapter training recipe handed to external trainers.
struct TrainingRecipe {
    std::filesystem::path corpus_path;
    int adapter_rank = 16;
    int adapter_alpha = 32;
    int batch_size = 16;
    int max_epochs = 2;
    int eval_checkpoint_epoch = 2;
};

// Requires the corpus to have been written first.
TrainingRecipe export_recipe(const TrainingCorpus& corpus,
                             const RecipeOverrides& overrides = {});

void write_recipe(const TrainingRecipe& recipe, const std::filesystem::path& path);
void write_stats(const CorpusStats& stats, Strategy strategy, std::uint64_t seed,
                 const std::filesystem::path& path);

} // namespace rega
