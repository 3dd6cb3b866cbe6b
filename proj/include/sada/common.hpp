// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sada {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. Everything user-facing derives from std::runtime_error so
// the CLI can map exception class -> exit code.

/// Malformed or unsupported specification of an operator / distribution.
struct InvalidSpecError : std::runtime_error {
    explicit InvalidSpecError(const std::string& what) : std::runtime_error(what) {}
};

/// Parameter outside its declared range.
struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

/// API misuse: a call that violates the documented calling contract.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Not enough stored data to satisfy a request (e.g. sampling an empty buffer).
struct InsufficientDataError : std::runtime_error {
    explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

/// Statistically degenerate input (e.g. zero variance in both samples).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration validation failure; carries the offending key.
struct ValidationError : std::runtime_error {
    std::string key;
    ValidationError(std::string k, const std::string& what)
        : std::runtime_error(k + ": " + what), key(std::move(k)) {}
};

/// File / IO failure with the path in the message.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Training aborted (non-finite loss); carries diagnostics.
struct TrainAbortError : std::runtime_error {
    long long step;
    std::string loss_name;
    std::string rng_state;
    TrainAbortError(long long s, std::string loss, std::string rng)
        : std::runtime_error("non-finite " + loss + " at step " + std::to_string(s)),
          step(s), loss_name(std::move(loss)), rng_state(std::move(rng)) {}
};

/// FNV-1a over raw bytes; used for parameter-purity checks and checkpoint ids.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace sada
