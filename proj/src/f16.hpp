#pragma once

#include <cstdint>
#include <cstring>

// IEEE-754 binary16 conversion done on the bit patterns (the toolchain here
// has no native half type on this target).  Encoding rounds to nearest even,
// matching what hardware converters do.

namespace caeloc {

inline uint16_t f32_to_f16_bits(float f) {
    uint32_t x;
    std::memcpy(&x, &f, 4);
    uint32_t sign = (x >> 16) & 0x8000u;
    uint32_t mant = x & 0x007FFFFFu;
    int exp = int((x >> 23) & 0xFFu);

    if (exp == 255) {  // inf / nan pass through
        if (mant) return uint16_t(sign | 0x7E00u);
        return uint16_t(sign | 0x7C00u);
    }
    int e = exp - 127 + 15;
    if (e >= 31) return uint16_t(sign | 0x7C00u);
    if (e <= 0) {
        if (e < -10) return uint16_t(sign);  // underflows to signed zero
        mant |= 0x00800000u;
        int shift = 14 - e;
        uint32_t half = mant >> shift;
        uint32_t rem = mant & ((1u << shift) - 1u);
        uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half & 1u))) half += 1;
        return uint16_t(sign | half);
    }
    uint32_t half = sign | (uint32_t(e) << 10) | (mant >> 13);
    uint32_t rem = mant & 0x1FFFu;
    // the round-up carry may spill into the exponent; that is the correct
    // result (values just under the next binade, or overflow to inf)
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) half += 1;
    return uint16_t(half);
}

inline float f16_bits_to_f32(uint16_t h) {
    uint32_t sign = uint32_t(h & 0x8000u) << 16;
    uint32_t exp = (h >> 10) & 0x1Fu;
    uint32_t mant = h & 0x3FFu;
    uint32_t x;
    if (exp == 0) {
        if (mant == 0) {
            x = sign;
        } else {
            int e = -1;
            do {
                mant <<= 1;
                ++e;
            } while (!(mant & 0x400u));
            mant &= 0x3FFu;
            x = sign | (uint32_t(112 - e) << 23) | (mant << 13);
        }
    } else if (exp == 31) {
        x = sign | 0x7F800000u | (mant << 13);
    } else {
        x = sign | ((exp + 112) << 23) | (mant << 13);
    }
    float f;
    std::memcpy(&f, &x, 4);
    return f;
}

// Largest finite half value; anything that would round past it becomes inf.
inline constexpr float f16_max = 65504.0f;

inline bool f16_overflows(float f) {
    uint16_t h = f32_to_f16_bits(f);
    return (h & 0x7C00u) == 0x7C00u && (h & 0x3FFu) == 0;  // became inf
}

} // namespace caeloc
