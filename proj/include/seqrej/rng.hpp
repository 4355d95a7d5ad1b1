#pragma once
#include <cstdint>
#include <span>
#include <string_view>

#include "seqrej/errors.hpp"

namespace seqrej {

// Counter-based generator built on the SplitMix64 finalizer. Output i of a
// stream with key k is mix(k + (i+1)*GOLDEN), so the stream is a pure function
// of (key, counter) and the same substream can be regenerated from any point.
// Substreams are derived by hashing a label and an index into a fresh key,
// which keeps parallel and serial rollout schedules on identical streams.
class Rng {
public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

    // Uniform double in [0,1), 53 mantissa bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Modulo bias is negligible for the desk-scale n used here (n << 2^32),
        // and keeping the map single-draw preserves counter alignment.
        return n ? next_u64() % n : 0;
    }

    // Index into a probability row; u outside the cumulative range (FP slack)
    // falls into the last entry with positive mass.
    int next_categorical(std::span<const double> probs) {
        const double u = next_unit();
        double cum = 0.0;
        int last_positive = -1;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            cum += probs[i];
            if (u < cum) return probs[i] > 0.0 ? i : last_positive;
        }
        if (last_positive < 0) throw ValidationError("categorical draw from all-zero row");
        return last_positive;
    }

    Rng split(std::string_view label, std::uint64_t index) const {
        std::uint64_t k = mix(key_ ^ fnv1a(label));
        k = mix(k + (index + 1) * kGolden);
        return Rng(k);
    }

    Rng split(std::uint64_t index) const { return split("stream", index); }

    std::uint64_t key() const { return key_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (char c : s) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001B3ull;
        }
        return h;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace seqrej
