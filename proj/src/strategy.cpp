#include "rega/strategy.hpp"

#include "rega/error.hpp"
#include "rega/rng.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <unordered_map>

namespace rega {

using nlohmann::json;

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::ft: return "ft";
        case Strategy::ftsd: return "ftsd";
        case Strategy::ftrp: return "ftrp";
        case Strategy::rega: return "rega";
    }
    return "ft";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "ft") return Strategy::ft;
    if (s == "ftsd") return Strategy::ftsd;
    if (s == "ftrp") return Strategy::ftrp;
    if (s == "rega") return Strategy::rega;
    throw ValidationError("unknown strategy '" + s + "' (expected ft|ftsd|ftrp|rega)");
}

void MixingRatio::validate() const {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw ValidationError("mixing ratio must lie in [0, 1], got " + std::to_string(value));
    }
}

void CorpusSpec::validate() const {
    for (const auto& d : domains) d.validate();
    if (general) general->validate();
    if ((strategy == Strategy::ftsd || strategy == Strategy::rega) && !general) {
        throw ValidationError(to_string(strategy) + " requires the self-distilled general set");
    }
    if (strategy == Strategy::ftrp || strategy == Strategy::rega) {
        if (!prompts) {
            throw ValidationError(to_string(strategy) + " requires a role prompt set");
        }
        std::vector<std::string> names;
        names.reserve(domains.size());
        for (const auto& d : domains) names.push_back(d.domain);
        prompts->validate(names);
    }
    if (strategy == Strategy::rega) {
        if (!mixing_ratio) throw ValidationError("rega requires a mixing ratio");
        mixing_ratio->validate();
    }
}

std::size_t subset_size(double r, std::size_t m) {
    if (r <= 0.0 || m == 0) return 0;
    auto k = static_cast<std::size_t>(std::floor(r * static_cast<double>(m)));
    if (k == 0) k = 1;
    return std::min(k, m);
}

DomainDataset sample_subset(const DomainDataset& dataset, MixingRatio r,
                            std::uint64_t seed) {
    r.validate();
    DomainDataset out;
    out.domain = dataset.domain;
    for (const auto& sd : dataset.sub_datasets) {
        const std::size_t k = subset_size(r.value, sd.samples.size());
        DeterministicRng rng(seed, "subset/" + dataset.domain + "/" + sd.name);
        auto perm = rng.permutation(sd.samples.size());
        SubDataset picked{sd.name, {}};
        picked.samples.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            picked.samples.push_back(sd.samples[perm[i]]);
        }
        out.sub_datasets.push_back(std::move(picked));
    }
    return out;
}

namespace {

void append_rendered(std::vector<RenderedRecord>& records, Composition& comp,
                     const DomainDataset& d, const PromptKind& kind,
                     const RolePromptSet& prompts) {
    for (const auto& sd : d.sub_datasets) {
        for (const auto& s : sd.samples) {
            records.push_back(render_sample(s, kind, prompts));
            ++comp[s.domain][kind.to_string()];
        }
    }
}

TrainingCorpus finish(TrainingCorpus corpus) {
    DeterministicRng rng(corpus.seed, "corpus-shuffle");
    rng.shuffle(corpus.records);
    return corpus;
}

const RolePromptSet& empty_prompts() {
    static const RolePromptSet none{};
    return none;
}

} // namespace

TrainingCorpus build_ft(const CorpusSpec& spec) {
    if (spec.strategy != Strategy::ft) throw ValidationError("spec strategy is not ft");
    spec.validate();
    TrainingCorpus corpus{Strategy::ft, spec.seed, {}, {}, {}};
    for (const auto& d : spec.domains) {
        append_rendered(corpus.records, corpus.composition, d, PromptKind::none(),
                        empty_prompts());
    }
    return finish(std::move(corpus));
}

TrainingCorpus build_ftsd(const CorpusSpec& spec) {
    if (spec.strategy != Strategy::ftsd) throw ValidationError("spec strategy is not ftsd");
    spec.validate();
    TrainingCorpus corpus{Strategy::ftsd, spec.seed, {}, {}, {}};
    append_rendered(corpus.records, corpus.composition, *spec.general, PromptKind::none(),
                    empty_prompts());
    for (const auto& d : spec.domains) {
        append_rendered(corpus.records, corpus.composition, d, PromptKind::none(),
                        empty_prompts());
    }
    return finish(std::move(corpus));
}

TrainingCorpus build_ftrp(const CorpusSpec& spec) {
    if (spec.strategy != Strategy::ftrp) throw ValidationError("spec strategy is not ftrp");
    spec.validate();
    TrainingCorpus corpus{Strategy::ftrp, spec.seed, {}, {}, {}};
    for (const auto& d : spec.domains) {
        append_rendered(corpus.records, corpus.composition, d, PromptKind::role(d.domain),
                        *spec.prompts);
    }
    return finish(std::move(corpus));
}

TrainingCorpus build_rega(const CorpusSpec& spec) {
    if (spec.strategy != Strategy::rega) throw ValidationError("spec strategy is not rega");
    spec.validate();
    TrainingCorpus corpus{Strategy::rega, spec.seed, {}, {}, {}};

    append_rendered(corpus.records, corpus.composition, *spec.general, PromptKind::central(),
                    *spec.prompts);
    for (const auto& d : spec.domains) {
        const auto picked = sample_subset(d, *spec.mixing_ratio, spec.seed);
        append_rendered(corpus.records, corpus.composition, picked, PromptKind::central(),
                        *spec.prompts);
    }
    for (const auto& d : spec.domains) {
        append_rendered(corpus.records, corpus.composition, d, PromptKind::role(d.domain),
                        *spec.prompts);
    }
    return finish(std::move(corpus));
}

TrainingCorpus build_corpus(const CorpusSpec& spec) {
    switch (spec.strategy) {
        case Strategy::ft: return build_ft(spec);
        case Strategy::ftsd: return build_ftsd(spec);
        case Strategy::ftrp: return build_ftrp(spec);
        case Strategy::rega: return build_rega(spec);
    }
    throw ValidationError("unknown strategy");
}

CorpusStats corpus_stats(const std::vector<RenderedRecord>& records) {
    CorpusStats stats;
    stats.total = records.size();
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& r : records) {
        ++stats.composition[r.source_domain][r.kind.to_string()];
        auto& n = seen[r.source_domain + "\x1f" + r.sample_id];
        if (n > 0) ++stats.duplicates;
        ++n;
    }
    return stats;
}

void write_corpus(TrainingCorpus& corpus, const std::filesystem::path& path) {
    write_records(corpus.records, path);
    corpus.persisted_path = path;
}

TrainingRecipe export_recipe(const TrainingCorpus& corpus, const RecipeOverrides& o) {
    if (corpus.persisted_path.empty() ||
        !std::filesystem::exists(corpus.persisted_path)) {
        throw ValidationError("corpus must be written to disk before exporting a recipe");
    }
    TrainingRecipe r;
    r.corpus_path = corpus.persisted_path;
    if (o.adapter_rank) r.adapter_rank = *o.adapter_rank;
    if (o.adapter_alpha) r.adapter_alpha = *o.adapter_alpha;
    if (o.batch_size) r.batch_size = *o.batch_size;
    if (o.max_epochs) r.max_epochs = *o.max_epochs;
    if (o.eval_checkpoint_epoch) r.eval_checkpoint_epoch = *o.eval_checkpoint_epoch;
    return r;
}

void write_recipe(const TrainingRecipe& recipe, const std::filesystem::path& path) {
    json j;
    j["corpus_path"] = recipe.corpus_path.string();
    j["adapter_rank"] = recipe.adapter_rank;
    j["adapter_alpha"] = recipe.adapter_alpha;
    j["batch_size"] = recipe.batch_size;
    j["max_epochs"] = recipe.max_epochs;
    j["eval_checkpoint_epoch"] = recipe.eval_checkpoint_epoch;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

void write_stats(const CorpusStats& stats, Strategy strategy, std::uint64_t seed,
                 const std::filesystem::path& path) {
    json comp = json::object();
    for (const auto& [domain, kinds] : stats.composition) {
        for (const auto& [kind, count] : kinds) comp[domain][kind] = count;
    }
    json j;
    j["strategy"] = to_string(strategy);
    j["seed"] = seed;
    j["total"] = stats.total;
    j["duplicates"] = stats.duplicates;
    j["composition"] = comp;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

} // namespace rega
