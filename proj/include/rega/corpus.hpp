#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rega {

// One instruction-response pair. `domain` is a registered domain label or
// "general"; `sub_dataset` names the source dataset within the domain and may
// be empty.
struct Sample {
    std::string id;
    std::string instruction;
    std::string response;
    std::string domain;
    std::string sub_dataset;

    bool operator==(const Sample&) const = default;
};

struct SubDataset {
    std::string name;
    std::vector<Sample> samples;

    bool operator==(const SubDataset&) const = default;
};

// A named collection of samples for one domain, partitioned into sub-datasets
// in first-appearance order.
struct DomainDataset {
    std::string domain;
    std::vector<SubDataset> sub_datasets;

    std::size_t size() const;
    // Appends to the sample's sub-dataset bucket, creating it on first use.
    void add(Sample s);
    // Throws ValidationError if a sample's domain differs from `domain`,
    // an instruction is empty after trimming, or an id repeats.
    void validate() const;

    bool operator==(const DomainDataset&) const = default;
};

// Central prompt p_c plus one role prompt per specific domain.
struct RolePromptSet {
    std::string central;
    std::string separator = "\n";
    std::map<std::string, std::string> roles;

    // Checks exactly-one-role-per-domain against `domains` and that no two
    // role texts coincide.
    void validate(const std::vector<std::string>& domains) const;
};

// Which prompt a record was rendered with.
struct PromptKind {
    enum class Tag { none, central, role };
    Tag tag = Tag::none;
    std::string domain; // role only

    static PromptKind none() { return {Tag::none, {}}; }
    static PromptKind central() { return {Tag::central, {}}; }
    static PromptKind role(std::string d) { return {Tag::role, std::move(d)}; }

    std::string to_string() const;
    static PromptKind from_string(const std::string& s);

    bool operator==(const PromptKind&) const = default;
};

// One training record: prompt ⊕ instruction plus provenance back to the
// source sample.
struct RenderedRecord {
    std::string prompt_text;
    std::string instruction;
    std::string response;
    std::string sample_id;
    std::string source_domain;
    std::string sub_dataset;
    PromptKind kind;

    bool operator==(const RenderedRecord&) const = default;
};

// prompt + separator + instruction. Empty prompt with empty separator leaves
// the instruction unchanged.
std::string concat_role_prompt(const std::string& prompt,
                               const std::string& instruction,
                               const std::string& separator);

// Inverse of concat_role_prompt: strips prompt+separator, or nullopt if
// `prompt_text` does not start with them.
std::optional<std::string> strip_prompt(const std::string& prompt_text,
                                        const std::string& prompt,
                                        const std::string& separator);

// Renders a sample under the given prompt kind. `none` uses an empty prompt
// and empty separator, so prompt_text equals the instruction.
RenderedRecord render_sample(const Sample& s, const PromptKind& kind,
                             const RolePromptSet& prompts);

// JSON Lines loader. Missing ids are synthesized as "<filename>:<line>".
// Lines must carry non-empty "instruction" and "response"; extra fields are
// ignored. Errors name the offending line.
DomainDataset load_dataset(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_domain = {});

void write_dataset(const DomainDataset& d, const std::filesystem::path& path);

// Rendered-corpus JSON Lines I/O. Lines carry the base sample fields plus
// prompt_text and a provenance object.
void write_records(const std::vector<RenderedRecord>& records,
                   const std::filesystem::path& path);
std::vector<RenderedRecord> load_records(const std::filesystem::path& path);

} // namespace rega
