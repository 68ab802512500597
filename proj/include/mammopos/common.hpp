#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mammopos {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened / read / written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input bytes do not form a supported document or raster.
class FormatError : public Error {
public:
    enum class Kind {
        Malformed,         // syntactically broken or truncated
        UnknownFormat,     // not a format we recognize at all
        ColorUnsupported,  // raster is not single-channel grayscale
        DepthUnsupported,  // bit depth outside 8/16
    };

    FormatError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Semantically invalid domain value (annotation outside image, bad config...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An operation precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Small domain enums
// ---------------------------------------------------------------------------

enum class ViewKind { Mlo, Cc };
enum class Laterality { Left, Right };
enum class ChestWall { Left, Right };

inline std::string to_string(ViewKind v) { return v == ViewKind::Mlo ? "MLO" : "CC"; }
inline std::string to_string(Laterality l) { return l == Laterality::Left ? "L" : "R"; }
inline std::string to_string(ChestWall s) { return s == ChestWall::Left ? "left" : "right"; }

inline std::optional<ViewKind> parse_view(std::string_view s) {
    if (s == "MLO" || s == "mlo") return ViewKind::Mlo;
    if (s == "CC" || s == "cc") return ViewKind::Cc;
    return std::nullopt;
}

inline std::optional<Laterality> parse_laterality(std::string_view s) {
    if (s == "L" || s == "l") return Laterality::Left;
    if (s == "R" || s == "r") return Laterality::Right;
    return std::nullopt;
}

inline Laterality opposite(Laterality l) {
    return l == Laterality::Left ? Laterality::Right : Laterality::Left;
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// Shortest decimal string that round-trips to the same double
/// (the style used throughout the text reports).
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Percentage with two decimals, e.g. 0.913533... -> "91.35".
inline std::string format_percent(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", ratio * 100.0);
    return buf;
}

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// splitmix64 step; used to derive independent sub-seeds from one master seed
/// so parallel/per-sample RNG streams stay decorrelated and reproducible.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    return mix_seed(mix_seed(master ^ 0xa076'1d64'78bd'642fULL) ^ mix_seed(stream) ^ (index * 0x100000001b3ULL));
}

}  // namespace mammopos
