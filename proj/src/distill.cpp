#include "rega/distill.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace rega {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

InstructionSet load_instruction_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    InstructionSet set;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string at = path.filename().string() + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(at + ": malformed JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("instruction") || !j["instruction"].is_string()) {
            throw ParseError(at + ": missing \"instruction\" field");
        }
        InstructionItem item;
        item.text = j["instruction"].get<std::string>();
        if (trim(item.text).empty()) throw ParseError(at + ": empty instruction");
        item.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : at;
        if (!ids.insert(item.id).second) {
            throw ValidationError(at + ": duplicate id '" + item.id + "'");
        }
        set.items.push_back(std::move(item));
    }
    return set;
}

std::string MockGenerationClient::generate(const std::string& instruction,
                                           const GenerationParams&) {
    const auto n = calls_.fetch_add(1);
    if (n >= unreachable_after_) {
        throw EndpointUnreachable("mock endpoint down");
    }
    if (failing_.count(instruction)) {
        throw GenerationError("mock failure for instruction");
    }
    return prefix_ + instruction;
}

void RetryPolicy::validate() const {
    if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
}

void DistillJob::validate() const {
    if (concurrency_limit < 1) throw ValidationError("concurrency_limit must be >= 1");
    retry.validate();
    if (checkpoint_path.empty()) throw ValidationError("checkpoint path is required");
    std::unordered_set<std::string> ids;
    for (const auto& item : instructions.items) {
        if (!ids.insert(item.id).second) {
            throw ValidationError("duplicate instruction id '" + item.id + "'");
        }
        if (item.text.empty()) {
            throw ValidationError("empty instruction text for id '" + item.id + "'");
        }
    }
}

namespace {

std::unordered_map<std::string, std::string> load_checkpoint(
    const std::filesystem::path& path) {
    std::unordered_map<std::string, std::string> done;
    std::ifstream in(path, std::ios::binary);
    if (!in) return done;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.filename().string() + ":" + std::to_string(lineno) +
                             ": corrupt checkpoint line: " + e.what());
        }
        done[j.at("id").get<std::string>()] = j.at("response").get<std::string>();
    }
    return done;
}

struct Slot {
    enum class State { pending, success, failed } state = State::pending;
    std::string text;   // response or error message
    int attempts = 0;
};

} // namespace

DistillOutcome distill(const DistillJob& job, GenerationClient& client) {
    job.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const auto done = load_checkpoint(job.checkpoint_path);

    // Work list = instructions without a checkpointed response.
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < job.instructions.items.size(); ++i) {
        if (!done.count(job.instructions.items[i].id)) work.push_back(i);
    }

    DistillOutcome outcome;
    outcome.report.skipped = job.instructions.items.size() - work.size();

    std::vector<Slot> slots(work.size());
    std::mutex mu;
    std::condition_variable cv;
    std::size_t next = 0;
    bool halted = false;
    std::string halt_reason;
    std::atomic<std::uint64_t> attempts_total{0};

    auto worker = [&] {
        for (;;) {
            std::size_t w;
            {
                std::lock_guard lock(mu);
                if (halted || next >= work.size()) return;
                w = next++;
            }
            const auto& item = job.instructions.items[work[w]];
            Slot slot;
            for (int attempt = 1; attempt <= job.retry.max_attempts; ++attempt) {
                ++slot.attempts;
                attempts_total.fetch_add(1);
                try {
                    slot.text = client.generate(item.text, job.params);
                    slot.state = Slot::State::success;
                    break;
                } catch (const EndpointUnreachable& e) {
                    if (attempt == job.retry.max_attempts) {
                        std::lock_guard lock(mu);
                        halted = true;
                        halt_reason = e.what();
                        cv.notify_all();
                        return;
                    }
                } catch (const GenerationError& e) {
                    if (attempt == job.retry.max_attempts) {
                        slot.state = Slot::State::failed;
                        slot.text = e.what();
                        break;
                    }
                }
                const auto& backoff = job.retry.backoff_ms;
                if (!backoff.empty()) {
                    const std::size_t bi =
                        std::min<std::size_t>(attempt - 1, backoff.size() - 1);
                    std::this_thread::sleep_for(std::chrono::milliseconds(backoff[bi]));
                }
            }
            {
                std::lock_guard lock(mu);
                slots[w] = std::move(slot);
                cv.notify_all();
            }
        }
    };

    const int n_threads =
        static_cast<int>(std::min<std::size_t>(job.concurrency_limit, work.size()));
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);

    // Single writer restores input order: the checkpoint is an in-order,
    // line-durable prefix of the completed work.
    std::ofstream ckpt(job.checkpoint_path, std::ios::binary | std::ios::app);
    if (!ckpt) {
        {
            std::lock_guard lock(mu);
            halted = true;
        }
        cv.notify_all();
        for (auto& t : threads) t.join();
        throw IoError("cannot open checkpoint '" + job.checkpoint_path.string() + "'");
    }
    std::ofstream sidecar;
    auto failed_path = job.checkpoint_path;
    failed_path += ".failed.jsonl";

    std::size_t cursor = 0;
    {
        std::unique_lock lock(mu);
        while (cursor < slots.size()) {
            cv.wait(lock, [&] {
                return slots[cursor].state != Slot::State::pending || halted;
            });
            if (slots[cursor].state == Slot::State::pending) break; // halted
            const auto& item = job.instructions.items[work[cursor]];
            const Slot& slot = slots[cursor];
            lock.unlock();
            if (slot.state == Slot::State::success) {
                json j;
                j["id"] = item.id;
                j["response"] = slot.text;
                ckpt << j.dump() << '\n';
                ckpt.flush();
            } else {
                if (!sidecar.is_open()) {
                    sidecar.open(failed_path, std::ios::binary | std::ios::app);
                }
                json j;
                j["id"] = item.id;
                j["error"] = slot.text;
                j["attempts"] = slot.attempts;
                sidecar << j.dump() << '\n';
                sidecar.flush();
            }
            lock.lock();
            ++cursor;
        }
    }
    for (auto& t : threads) t.join();

    // Flush any in-order completions that finished while halting.
    while (cursor < slots.size() && slots[cursor].state != Slot::State::pending) {
        const auto& item = job.instructions.items[work[cursor]];
        const Slot& slot = slots[cursor];
        json j;
        j["id"] = item.id;
        if (slot.state == Slot::State::success) {
            j["response"] = slot.text;
            ckpt << j.dump() << '\n';
            ckpt.flush();
        } else {
            if (!sidecar.is_open()) {
                sidecar.open(failed_path, std::ios::binary | std::ios::app);
            }
            j["error"] = slot.text;
            j["attempts"] = slot.attempts;
            sidecar << j.dump() << '\n';
            sidecar.flush();
        }
        ++cursor;
    }

    outcome.report.backend_calls = attempts_total.load();
    outcome.halted = halted;
    outcome.halt_reason = halt_reason;

    // Assemble D_g in instruction order from checkpoint + fresh successes.
    std::unordered_map<std::size_t, const Slot*> fresh;
    for (std::size_t w = 0; w < work.size(); ++w) fresh[work[w]] = &slots[w];

    outcome.dataset.domain = "general";
    for (std::size_t i = 0; i < job.instructions.items.size(); ++i) {
        const auto& item = job.instructions.items[i];
        std::string response;
        if (auto it = done.find(item.id); it != done.end()) {
            response = it->second;
        } else {
            const Slot* slot = fresh.at(i);
            if (slot->state == Slot::State::success) {
                response = slot->text;
                ++outcome.report.succeeded;
            } else {
                if (slot->state == Slot::State::failed) ++outcome.report.failed;
                continue;
            }
        }
        outcome.dataset.add(Sample{item.id, item.text, std::move(response), "general", {}});
    }

    outcome.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return outcome;
}

} // namespace rega
