#pragma once

#include <cstdint>
#include <string_view>

namespace mcsim {

enum class Err : std::uint8_t {
    Ok = 0,
    AlreadyBound,
    NotBound,
    NoAuthority,
    ExceedsMcp,
    ExceedsMcc,
    BadParams,
    BadLevel,
    DonationRefused,
    NoReplyCap,
    EmptySlot,
    NoFault,
    NoBudget,
    InvalidId,
    Aborted,
};

constexpr std::string_view to_string(Err e) {
    switch (e) {
    case Err::Ok: return "ok";
    case Err::AlreadyBound: return "AlreadyBound";
    case Err::NotBound: return "NotBound";
    case Err::NoAuthority: return "NoAuthority";
    case Err::ExceedsMcp: return "ExceedsMcp";
    case Err::ExceedsMcc: return "ExceedsMcc";
    case Err::BadParams: return "BadParams";
    case Err::BadLevel: return "BadLevel";
    case Err::DonationRefused: return "DonationRefused";
    case Err::NoReplyCap: return "NoReplyCap";
    case Err::EmptySlot: return "EmptySlot";
    case Err::NoFault: return "NoFault";
    case Err::NoBudget: return "NoBudget";
    case Err::InvalidId: return "InvalidId";
    case Err::Aborted: return "Aborted";
    }
    return "?";
}

template <class T>
struct Result {
    Err err = Err::Ok;
    T value{};

    [[nodiscard]] bool ok() const { return err == Err::Ok; }

    static Result failure(Err e) { return Result{e, T{}}; }
    static Result success(T v) { return Result{Err::Ok, static_cast<T&&>(v)}; }
};

/// Result of the system call that last unblocked / completed for a thread.
struct SyscallOutcome {
    Err err = Err::Ok;
    std::uint64_t value = 0;  // returned badge / consumed time / boost count
};

}  // namespace mcsim
