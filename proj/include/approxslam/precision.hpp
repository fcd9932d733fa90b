#pragma once

// Reduced-precision mode: values are rounded to IEEE binary16 (round to
// nearest, ties to even) and widened back to float. Magnitudes beyond the
// binary16 range clamp to +-65504.

#include <bit>
#include <cstdint>
#include <span>

namespace approxslam {

inline std::uint16_t float_to_half_bits(float value) {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t abs = x & 0x7FFFFFFFu;

    if (abs > 0x7F800000u) return sign | 0x7E00u;       // NaN
    if (abs >= 0x477FF000u) return sign | 0x7BFFu;      // rounds past 65504: clamp
    if (abs < 0x38800000u) {                             // binary16 subnormal range
        if (abs < 0x33000000u) return sign;              // below half the smallest subnormal
        const std::uint32_t exponent = abs >> 23;
        const std::uint32_t mantissa = (abs & 0x7FFFFFu) | 0x800000u;
        const std::uint32_t shift = 126u - exponent;
        std::uint32_t r = mantissa >> shift;
        const std::uint32_t rem = mantissa & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1u);
        if (rem > halfway || (rem == halfway && (r & 1u))) ++r;
        return sign | static_cast<std::uint16_t>(r);
    }
    std::uint32_t bits = ((abs >> 23) - 112u) << 10 | ((abs & 0x7FFFFFu) >> 13);
    const std::uint32_t rem = abs & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (bits & 1u))) ++bits;
    return sign | static_cast<std::uint16_t>(bits);
}

inline float half_bits_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    const std::uint32_t exponent = (h >> 10) & 0x1Fu;
    std::uint32_t mantissa = h & 0x3FFu;
    std::uint32_t bits;
    if (exponent == 0) {
        if (mantissa == 0) {
            bits = sign;
        } else {
            int e = -1;
            do {
                ++e;
                mantissa <<= 1;
            } while ((mantissa & 0x400u) == 0);
            bits = sign | ((112u - e) << 23) | ((mantissa & 0x3FFu) << 13);
        }
    } else if (exponent == 0x1F) {
        bits = sign | 0x7F800000u | (mantissa << 13);
    } else {
        bits = sign | ((exponent + 112u) << 23) | (mantissa << 13);
    }
    return std::bit_cast<float>(bits);
}

inline float quantize_half(float value) { return half_bits_to_float(float_to_half_bits(value)); }

/// Rounds every element of `buffer` to binary16 in place.
inline void quantize_reduced(std::span<float> buffer) {
    for (float& v : buffer) v = quantize_half(v);
}

}  // namespace approxslam
