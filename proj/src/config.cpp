#include "rega/config.hpp"

#include "rega/error.hpp"

#include <fstream>
#include <json.hpp>

namespace rega {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

RolePromptSet prompts_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": prompts must be an object");
    RolePromptSet p;
    p.central = j.value("central", std::string{});
    p.separator = j.value("separator", std::string{"\n"});
    if (j.contains("roles")) {
        if (!j["roles"].is_object()) {
            throw ValidationError(where + ": \"roles\" must map domains to prompt text");
        }
        for (const auto& [domain, text] : j["roles"].items()) {
            if (!text.is_string()) {
                throw ValidationError(where + ": role prompt for '" + domain +
                                      "' must be a string");
            }
            p.roles[domain] = text.get<std::string>();
        }
    }
    return p;
}

} // namespace

RolePromptSet load_prompts_file(const std::filesystem::path& path) {
    return prompts_from_json(read_json(path), path.string());
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    const json j = read_json(path);
    if (!j.is_object()) throw ValidationError(path.string() + ": config must be an object");

    PipelineConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("mixing_ratio")) cfg.mixing_ratio = j["mixing_ratio"].get<double>();
    if (j.contains("output_dir")) {
        cfg.output_dir = std::filesystem::path(j["output_dir"].get<std::string>());
    }
    if (j.contains("general")) {
        cfg.general_path = std::filesystem::path(j["general"].get<std::string>());
    }
    if (j.contains("domains")) {
        if (!j["domains"].is_object()) {
            throw ValidationError(path.string() + ": \"domains\" must be an object");
        }
        for (const auto& [name, entry] : j["domains"].items()) {
            DomainEntry d;
            if (entry.is_string()) {
                d.train_path = entry.get<std::string>();
            } else if (entry.is_object()) {
                if (!entry.contains("train")) {
                    throw ValidationError(path.string() + ": domain '" + name +
                                          "' lacks a \"train\" path");
                }
                d.train_path = entry["train"].get<std::string>();
                if (entry.contains("test")) {
                    d.test_path = std::filesystem::path(entry["test"].get<std::string>());
                }
                if (entry.contains("metric")) {
                    d.metric = metric_from_string(entry["metric"].get<std::string>());
                }
            } else {
                throw ValidationError(path.string() + ": domain '" + name +
                                      "' must be a path or an object");
            }
            cfg.domains[name] = std::move(d);
        }
    }
    if (j.contains("prompts")) {
        cfg.prompts = prompts_from_json(j["prompts"], path.string());
    }
    if (j.contains("endpoint")) {
        const auto& e = j["endpoint"];
        cfg.endpoint.url = e.value("url", std::string{});
        cfg.endpoint.api_key_env = e.value("api_key_env", cfg.endpoint.api_key_env);
        cfg.endpoint.concurrency = e.value("concurrency", cfg.endpoint.concurrency);
        cfg.endpoint.max_attempts = e.value("max_attempts", cfg.endpoint.max_attempts);
        cfg.endpoint.timeout_seconds =
            e.value("timeout_seconds", cfg.endpoint.timeout_seconds);
        cfg.generation.model_name = e.value("model", cfg.generation.model_name);
        cfg.generation.temperature = e.value("temperature", cfg.generation.temperature);
        cfg.generation.top_p = e.value("top_p", cfg.generation.top_p);
        cfg.generation.max_new_tokens =
            e.value("max_new_tokens", cfg.generation.max_new_tokens);
    }
    return cfg;
}

void PipelineConfig::validate_paths() const {
    for (const auto& [name, entry] : domains) {
        if (!std::filesystem::exists(entry.train_path)) {
            throw ValidationError("domain '" + name + "': missing train file '" +
                                  entry.train_path.string() + "'");
        }
        if (entry.test_path && !std::filesystem::exists(*entry.test_path)) {
            throw ValidationError("domain '" + name + "': missing test file '" +
                                  entry.test_path->string() + "'");
        }
    }
    if (general_path && !std::filesystem::exists(*general_path)) {
        throw ValidationError("missing general dataset '" + general_path->string() + "'");
    }
    if (mixing_ratio && !(*mixing_ratio >= 0.0 && *mixing_ratio <= 1.0)) {
        throw ValidationError("mixing ratio must lie in [0, 1]");
    }
}

} // namespace rega
