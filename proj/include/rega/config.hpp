#pragma once

#include "rega/corpus.hpp"
#include "rega/distill.hpp"
#include "rega/eval.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace rega {

struct DomainEntry {
    std::filesystem::path train_path;
    std::optional<std::filesystem::path> test_path;
    std::optional<Metric> metric;
};

struct EndpointSettings {
    std::string url;
    std::string api_key_env = "OPENAI_API_KEY";
    int concurrency = 1;
    int max_attempts = 3;
    int timeout_seconds = 120;
};

// One structured document binding every pipeline parameter; CLI flags
// override individual fields.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::optional<double> mixing_ratio;
    std::map<std::string, DomainEntry> domains; // label -> paths
    std::optional<std::filesystem::path> general_path;
    std::optional<RolePromptSet> prompts;
    std::optional<std::filesystem::path> output_dir;
    EndpointSettings endpoint;
    GenerationParams generation;

    static PipelineConfig load(const std::filesystem::path& path);
    // Referenced dataset paths must exist; ratio must lie in [0,1].
    void validate_paths() const;
};

RolePromptSet load_prompts_file(const std::filesystem::path& path);

} // namespace rega
