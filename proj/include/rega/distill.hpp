#pragma once

#include "rega/corpus.hpp"
#include "rega/error.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

namespace rega {

struct InstructionItem {
    std::string id;
    std::string text;
};

struct InstructionSet {
    std::vector<InstructionItem> items;
};

// JSON Lines with an "instruction" field per line; ids are synthesized as
// "<filename>:<line>" when absent. Duplicate texts are fine, duplicate ids
// are not.
InstructionSet load_instruction_set(const std::filesystem::path& path);

struct GenerationParams {
    double temperature = 0.7;
    double top_p = 0.95;
    int max_new_tokens = 1024;
    std::string model_name;
};

// A single generation attempt failed; the runner retries up to max_attempts
// and then records the item as failed.
class GenerationError : public std::runtime_error {
public:
    explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// The backend cannot be reached at all; after retries the whole job halts
// with the checkpoint preserved.
class EndpointUnreachable : public std::runtime_error {
public:
    explicit EndpointUnreachable(const std::string& msg) : std::runtime_error(msg) {}
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual std::string generate(const std::string& instruction,
                                 const GenerationParams& params) = 0;
};

// Offline deterministic backend: replies with prefix + instruction. Failures
// are programmable per id; `set_unreachable_after(k)` lets the first k calls
// succeed and makes every later call throw EndpointUnreachable.
class MockGenerationClient : public GenerationClient {
public:
    explicit MockGenerationClient(std::string prefix = "OK:")
        : prefix_(std::move(prefix)) {}

    std::string generate(const std::string& instruction,
                         const GenerationParams& params) override;

    void fail_instruction(const std::string& instruction_text) {
        failing_.insert(instruction_text);
    }
    void set_unreachable_after(std::uint64_t k) { unreachable_after_ = k; }
    std::uint64_t calls() const { return calls_.load(); }

private:
    std::string prefix_;
    std::unordered_set<std::string> failing_;
    std::uint64_t unreachable_after_ = UINT64_MAX;
    std::atomic<std::uint64_t> calls_{0};
};

// OpenAI-compatible chat-completions backend. The credential is read from the
// environment variable named by `api_key_env` (sent as a bearer token when
// present).
class HttpGenerationClient : public GenerationClient {
public:
    HttpGenerationClient(std::string endpoint_url,
                         std::string api_key_env = "OPENAI_API_KEY",
                         int timeout_seconds = 120);
    ~HttpGenerationClient() override;

    std::string generate(const std::string& instruction,
                         const GenerationParams& params) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::vector<int> backoff_ms = {200, 1000, 4000}; // before attempt i+2

    void validate() const;
};

struct DistillJob {
    InstructionSet instructions;
    GenerationParams params;
    int concurrency_limit = 1;
    std::filesystem::path checkpoint_path;
    RetryPolicy retry;

    void validate() const;
};

struct DistillReport {
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::size_t skipped = 0;
    std::uint64_t backend_calls = 0; // generation attempts made by this run
    double wall_time_s = 0.0;
};

struct DistillOutcome {
    DomainDataset dataset; // domain "general", instruction order
    DistillReport report;
    bool halted = false;
    std::string halt_reason;
};

// Runs the job against the client. Completed responses are appended to the
// checkpoint in instruction order and survive interruption; checkpointed ids
// are skipped on resume. Per-item failures land in "<checkpoint>.failed.jsonl"
// and the job continues; an unreachable endpoint halts the job instead.
DistillOutcome distill(const DistillJob& job, GenerationClient& client);

} // namespace rega
