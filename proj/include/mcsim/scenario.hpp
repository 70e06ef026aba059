#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcsim/engine.hpp"

namespace mcsim {

/// Raised for malformed scenario files; the message names the offending
/// section and field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Plays a parsed step list. Beyond plain kernel actions it supports a
/// per-thread data word ("store") and checkpoints: a checkpoint snapshots
/// the program counter and data word, and a later rollback (issued by a
/// timeout handler) restores both and re-enters receive on the endpoint
/// named by the checkpoint.
class ScriptBehavior : public Behavior {
public:
    struct Step {
        enum class Op { Kernel, Checkpoint, Store } op = Op::Kernel;
        Action action;                 // Kernel
        bool badge_from_data = false;  // Kernel: use the data word as badge
        bool from_last = false;        // Store: data = last outcome value + value
        std::uint64_t value = 0;       // Store
        EpId resume;                   // Checkpoint: receive here after rollback
    };

    ScriptBehavior(std::vector<Step> steps, int loop_from = -1)
        : steps_(std::move(steps)), loop_from_(loop_from) {}

    Action next(BehaviorContext&, const SyscallOutcome& last) override {
        while (true) {
            if (pc_ >= steps_.size()) {
                if (loop_from_ < 0) return Action::halt();
                pc_ = static_cast<std::size_t>(loop_from_);
            }
            Step& s = steps_[pc_++];
            switch (s.op) {
            case Step::Op::Checkpoint:
                ck_pc_ = pc_;
                ck_data_ = data_;
                ck_resume_ = s.resume;
                break;
            case Step::Op::Store:
                data_ = s.from_last ? last.value + s.value : s.value;
                break;
            case Step::Op::Kernel: {
                Action a = s.action;
                if (s.badge_from_data) a.badge = data_;
                return a;
            }
            }
        }
    }

    std::optional<EpId> rollback() override {
        pc_ = ck_pc_;
        data_ = ck_data_;
        if (ck_resume_.valid()) return ck_resume_;
        return std::nullopt;
    }

    [[nodiscard]] std::uint64_t data() const { return data_; }

private:
    std::vector<Step> steps_;
    int loop_from_;
    std::size_t pc_ = 0;
    std::uint64_t data_ = 0;
    std::size_t ck_pc_ = 0;
    std::uint64_t ck_data_ = 0;
    EpId ck_resume_;
};

/// A fully built simulation: the engine plus name lookups for everything
/// the scenario file declared.
struct Scenario {
    std::unique_ptr<Engine> engine;
    Tick horizon = 0;
    std::map<std::string, ThreadId> threads;
    std::map<std::string, ScId> scs;
    std::map<std::string, EpId> endpoints;
    std::map<std::string, NtfnId> notifications;
    std::map<std::string, Tick> deadline_period;  // threads with implicit deadlines

    [[nodiscard]] ThreadId thread(const std::string& name) const;
    [[nodiscard]] ScId sc(const std::string& name) const;
    void run() { engine->run(horizon); }
};

Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);

struct MissRecord {
    std::string thread;
    std::uint64_t job = 0;      // job index, 0-based
    Tick deadline = 0;
    Tick completed = kNever;    // kNever: never finished
};

/// Jobs of a periodic thread (released every `period` from 0) that
/// completed after their implicit deadline, or not at all, within the
/// deadlines falling inside [0, horizon].
std::vector<MissRecord> deadline_misses(const Engine& eng, ThreadId t,
                                        const std::string& name, Tick period,
                                        Tick horizon);

struct Summary {
    Tick horizon = 0;
    Tick idle = 0;
    Tick charged_total = 0;  // over all SCs
    std::vector<std::pair<std::string, Tick>> thread_cpu;
    std::vector<std::pair<std::string, Tick>> sc_charged;
    std::vector<MissRecord> misses;
    std::map<std::string, std::uint64_t> ledger;
    bool time_conserved = false;  // charged_total + idle == horizon
};

/// Collect per-thread/per-SC accounting, deadline misses and the ledger
/// after a run.
Summary summarize(const Scenario& s);

/// Fixed-order CSV rendering of a summary, suitable for golden diffs.
std::string summary_csv(const Summary& s);

}  // namespace mcsim
