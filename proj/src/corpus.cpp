#include "rega/corpus.hpp"

#include "rega/error.hpp"

#include <fstream>
#include <json.hpp>
#include <unordered_set>

namespace rega {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string where(const std::filesystem::path& p, std::size_t line) {
    return p.filename().string() + ":" + std::to_string(line);
}

} // namespace

std::size_t DomainDataset::size() const {
    std::size_t n = 0;
    for (const auto& sd : sub_datasets) n += sd.samples.size();
    return n;
}

void DomainDataset::add(Sample s) {
    for (auto& sd : sub_datasets) {
        if (sd.name == s.sub_dataset) {
            sd.samples.push_back(std::move(s));
            return;
        }
    }
    sub_datasets.push_back({s.sub_dataset, {}});
    sub_datasets.back().samples.push_back(std::move(s));
}

void DomainDataset::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& sd : sub_datasets) {
        for (const auto& s : sd.samples) {
            if (s.domain != domain) {
                throw ValidationError("sample '" + s.id + "' has domain '" + s.domain +
                                      "', dataset is '" + domain + "'");
            }
            if (trim(s.instruction).empty()) {
                throw ValidationError("sample '" + s.id + "' has an empty instruction");
            }
            if (!ids.insert(s.id).second) {
                throw ValidationError("duplicate sample id '" + s.id + "'");
            }
        }
    }
}

void RolePromptSet::validate(const std::vector<std::string>& domains) const {
    for (const auto& d : domains) {
        if (!roles.count(d)) {
            throw ValidationError("no role prompt for domain '" + d + "'");
        }
    }
    for (auto a = roles.begin(); a != roles.end(); ++a) {
        for (auto b = std::next(a); b != roles.end(); ++b) {
            if (a->second == b->second) {
                throw ValidationError("role prompts for '" + a->first + "' and '" + b->first +
                                      "' are identical");
            }
        }
    }
}

std::string PromptKind::to_string() const {
    switch (tag) {
        case Tag::none: return "none";
        case Tag::central: return "central";
        case Tag::role: return "role:" + domain;
    }
    return "none";
}

PromptKind PromptKind::from_string(const std::string& s) {
    if (s == "none") return none();
    if (s == "central") return central();
    if (s.rfind("role:", 0) == 0) return role(s.substr(5));
    throw ValidationError("unknown prompt kind '" + s + "'");
}

std::string concat_role_prompt(const std::string& prompt, const std::string& instruction,
                               const std::string& separator) {
    return prompt + separator + instruction;
}

std::optional<std::string> strip_prompt(const std::string& prompt_text,
                                        const std::string& prompt,
                                        const std::string& separator) {
    const std::string prefix = prompt + separator;
    if (prompt_text.size() < prefix.size() ||
        prompt_text.compare(0, prefix.size(), prefix) != 0) {
        return std::nullopt;
    }
    return prompt_text.substr(prefix.size());
}

RenderedRecord render_sample(const Sample& s, const PromptKind& kind,
                             const RolePromptSet& prompts) {
    std::string prompt_text;
    switch (kind.tag) {
        case PromptKind::Tag::none:
            prompt_text = s.instruction;
            break;
        case PromptKind::Tag::central:
            prompt_text = concat_role_prompt(prompts.central, s.instruction, prompts.separator);
            break;
        case PromptKind::Tag::role: {
            auto it = prompts.roles.find(kind.domain);
            if (it == prompts.roles.end()) {
                throw ValidationError("no role prompt for domain '" + kind.domain + "'");
            }
            prompt_text = concat_role_prompt(it->second, s.instruction, prompts.separator);
            break;
        }
    }
    return RenderedRecord{std::move(prompt_text), s.instruction, s.response,
                          s.id,  s.domain,        s.sub_dataset, kind};
}

DomainDataset load_dataset(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_domain) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    DomainDataset out;
    if (expected_domain) out.domain = *expected_domain;

    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    bool domain_fixed = expected_domain.has_value();

    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where(path, lineno) + ": malformed JSON: " + e.what());
        }
        if (!j.is_object()) {
            throw ParseError(where(path, lineno) + ": expected a JSON object");
        }
        if (!j.contains("instruction") || !j["instruction"].is_string()) {
            throw ParseError(where(path, lineno) + ": missing \"instruction\" field");
        }
        if (!j.contains("response") || !j["response"].is_string()) {
            throw ParseError(where(path, lineno) + ": missing \"response\" field");
        }

        Sample s;
        s.instruction = j["instruction"].get<std::string>();
        s.response = j["response"].get<std::string>();
        if (trim(s.instruction).empty()) {
            throw ParseError(where(path, lineno) + ": empty instruction");
        }

        if (j.contains("id")) {
            if (!j["id"].is_string()) {
                throw ParseError(where(path, lineno) + ": \"id\" must be a string");
            }
            s.id = j["id"].get<std::string>();
        } else {
            s.id = where(path, lineno);
        }
        if (!ids.insert(s.id).second) {
            throw ValidationError(where(path, lineno) + ": duplicate id '" + s.id + "'");
        }

        if (j.contains("domain")) {
            if (!j["domain"].is_string()) {
                throw ParseError(where(path, lineno) + ": \"domain\" must be a string");
            }
            s.domain = j["domain"].get<std::string>();
            if (!domain_fixed && out.domain.empty()) {
                out.domain = s.domain;
            }
            if (s.domain != out.domain) {
                throw ValidationError(where(path, lineno) + ": domain '" + s.domain +
                                      "' does not match dataset domain '" + out.domain + "'");
            }
        } else {
            if (out.domain.empty()) out.domain = path.stem().string();
            s.domain = out.domain;
        }

        if (j.contains("sub_dataset")) {
            if (!j["sub_dataset"].is_string()) {
                throw ParseError(where(path, lineno) + ": \"sub_dataset\" must be a string");
            }
            s.sub_dataset = j["sub_dataset"].get<std::string>();
        }

        out.add(std::move(s));
    }

    if (out.domain.empty()) out.domain = path.stem().string();
    return out;
}

namespace {

json sample_to_json(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["instruction"] = s.instruction;
    j["response"] = s.response;
    j["domain"] = s.domain;
    if (!s.sub_dataset.empty()) j["sub_dataset"] = s.sub_dataset;
    return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
    const auto dir = path.parent_path();
    if (!dir.empty() && !std::filesystem::exists(dir)) {
        throw IoError("destination directory '" + dir.string() + "' does not exist");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

} // namespace

void write_dataset(const DomainDataset& d, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& sd : d.sub_datasets) {
        for (const auto& s : sd.samples) {
            out << sample_to_json(s).dump() << '\n';
        }
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_records(const std::vector<RenderedRecord>& records,
                   const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& r : records) {
        json j;
        j["instruction"] = r.instruction;
        j["response"] = r.response;
        j["domain"] = r.source_domain;
        if (!r.sub_dataset.empty()) j["sub_dataset"] = r.sub_dataset;
        j["prompt_text"] = r.prompt_text;
        j["provenance"] = {{"sample_id", r.sample_id},
                           {"source_domain", r.source_domain},
                           {"prompt_kind", r.kind.to_string()}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<RenderedRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    std::vector<RenderedRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where(path, lineno) + ": malformed JSON: " + e.what());
        }
        for (const char* f : {"prompt_text", "response", "instruction"}) {
            if (!j.contains(f) || !j[f].is_string()) {
                throw ParseError(where(path, lineno) + ": missing \"" + std::string(f) + "\"");
            }
        }
        if (!j.contains("provenance") || !j["provenance"].is_object()) {
            throw ParseError(where(path, lineno) + ": missing \"provenance\"");
        }
        const auto& p = j["provenance"];
        RenderedRecord r;
        r.prompt_text = j["prompt_text"].get<std::string>();
        r.instruction = j["instruction"].get<std::string>();
        r.response = j["response"].get<std::string>();
        r.sample_id = p.value("sample_id", std::string{});
        r.source_domain = p.value("source_domain", std::string{});
        r.sub_dataset = j.value("sub_dataset", std::string{});
        r.kind = PromptKind::from_string(p.value("prompt_kind", std::string{"none"}));
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace rega
