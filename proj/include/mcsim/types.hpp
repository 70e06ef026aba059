#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>

namespace mcsim {

/// Simulated time in ticks; one tick is one simulated microsecond.
using Tick = std::uint64_t;

inline constexpr Tick kNever = std::numeric_limits<Tick>::max();

/// Strongly typed object id. Invalid ids compare equal to a
/// default-constructed one.
template <class Tag>
struct Id {
    std::uint32_t index = std::numeric_limits<std::uint32_t>::max();

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t i) : index(i) {}

    [[nodiscard]] constexpr bool valid() const {
        return index != std::numeric_limits<std::uint32_t>::max();
    }
    constexpr void reset() { index = std::numeric_limits<std::uint32_t>::max(); }

    friend constexpr auto operator<=>(Id, Id) = default;
};

using ThreadId = Id<struct ThreadTag>;
using ScId = Id<struct ScTag>;
using EpId = Id<struct EpTag>;
using NtfnId = Id<struct NtfnTag>;
using ReplyId = Id<struct ReplyTag>;

}  // namespace mcsim

template <class Tag>
struct std::hash<mcsim::Id<Tag>> {
    std::size_t operator()(mcsim::Id<Tag> id) const noexcept {
        return std::hash<std::uint32_t>{}(id.index);
    }
};
