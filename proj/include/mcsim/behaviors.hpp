#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mcsim/engine.hpp"

namespace mcsim {

/// Plays a fixed list of actions, optionally looping back to an index
/// once the end is reached. Enough for periodic tasks and most servers.
class SequenceBehavior : public Behavior {
public:
    explicit SequenceBehavior(std::vector<Action> actions, int loop_from = -1)
        : actions_(std::move(actions)), loop_from_(loop_from) {}

    Action next(BehaviorContext&, const SyscallOutcome&) override {
        if (pc_ >= actions_.size()) {
            if (loop_from_ < 0) return Action::halt();
            pc_ = static_cast<std::size_t>(loop_from_);
        }
        return actions_[pc_++];
    }

private:
    std::vector<Action> actions_;
    int loop_from_;
    std::size_t pc_ = 0;
};

/// Arbitrary logic in a lambda; used by the user-level schedulers and by
/// tests that need to react to outcomes.
class FnBehavior : public Behavior {
public:
    using Fn = std::function<Action(BehaviorContext&, const SyscallOutcome&)>;
    using RollbackFn = std::function<std::optional<EpId>()>;

    explicit FnBehavior(Fn fn, RollbackFn rb = {})
        : fn_(std::move(fn)), rb_(std::move(rb)) {}

    Action next(BehaviorContext& ctx, const SyscallOutcome& last) override {
        return fn_(ctx, last);
    }
    std::optional<EpId> rollback() override {
        return rb_ ? rb_() : std::nullopt;
    }

private:
    Fn fn_;
    RollbackFn rb_;
};

/// A periodic job of `c` ticks per replenishment period. With the budget
/// set to exactly `c` the expiry path re-releases the task each period on
/// its own; when the budget leaves slack, pass `with_yield` to forfeit
/// the rest of the period explicitly.
inline std::unique_ptr<Behavior> periodic_task(Tick c, bool with_yield = false) {
    std::vector<Action> a;
    a.push_back(Action::compute(c, /*job=*/true));
    if (with_yield) {
        Action y;
        y.kind = Action::Kind::Yield;
        a.push_back(y);
    }
    return std::make_unique<SequenceBehavior>(std::move(a), 0);
}

/// Runs forever; a best-effort background thread.
inline std::unique_ptr<Behavior> busy_loop(Tick chunk = 1000000) {
    return std::make_unique<SequenceBehavior>(
        std::vector<Action>{Action::compute(chunk)}, 0);
}

}  // namespace mcsim
