#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>

namespace pburg {

/// A numeric constant that is an exact rational when it originates from an
/// integer or `p/q` literal and a double otherwise. Exactness survives
/// +, -, *, / and integer powers as long as the operands are exact and the
/// result fits in 64 bits; anything else degrades to a double.
class Number {
  public:
    Number() : exact_(true), num_(0), den_(1), val_(0.0) {}

    static Number integer(std::int64_t n) { return Number(n, 1); }

    static Number rational(std::int64_t n, std::int64_t d) { return Number(n, d); }

    static Number real(double v) {
        Number r;
        r.exact_ = false;
        r.num_ = 0;
        r.den_ = 1;
        r.val_ = v;
        return r;
    }

    bool exact() const { return exact_; }
    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double value() const { return val_; }

    bool is_zero() const { return exact_ ? num_ == 0 : val_ == 0.0; }
    bool is_one() const { return exact_ ? (num_ == 1 && den_ == 1) : val_ == 1.0; }
    bool is_integer() const { return exact_ && den_ == 1; }
    bool negative() const { return exact_ ? num_ < 0 : val_ < 0.0; }

    Number operator-() const {
        if (exact_) return Number(-num_, den_);
        return real(-val_);
    }

    friend Number operator+(const Number& a, const Number& b) {
        if (a.exact_ && b.exact_) {
            __int128 n = (__int128)a.num_ * b.den_ + (__int128)b.num_ * a.den_;
            __int128 d = (__int128)a.den_ * b.den_;
            return from_i128(n, d, a.val_ + b.val_);
        }
        return real(a.val_ + b.val_);
    }

    friend Number operator-(const Number& a, const Number& b) { return a + (-b); }

    friend Number operator*(const Number& a, const Number& b) {
        if (a.exact_ && b.exact_) {
            __int128 n = (__int128)a.num_ * b.num_;
            __int128 d = (__int128)a.den_ * b.den_;
            return from_i128(n, d, a.val_ * b.val_);
        }
        return real(a.val_ * b.val_);
    }

    /// Division; caller must rule out a zero divisor.
    friend Number operator/(const Number& a, const Number& b) {
        if (a.exact_ && b.exact_ && b.num_ != 0) {
            __int128 n = (__int128)a.num_ * b.den_;
            __int128 d = (__int128)a.den_ * b.num_;
            return from_i128(n, d, a.val_ / b.val_);
        }
        return real(a.val_ / b.val_);
    }

    /// Integer power; stays exact for exact bases and |e| small enough.
    Number pow_int(std::int64_t e) const {
        if (exact_) {
            bool inv = e < 0;
            std::uint64_t k = inv ? -(std::uint64_t)e : (std::uint64_t)e;
            Number acc = integer(1), base = *this;
            bool ok = true;
            while (k) {
                if (k & 1) {
                    acc = acc * base;
                    ok = ok && acc.exact_;
                }
                k >>= 1;
                if (k) {
                    base = base * base;
                    ok = ok && base.exact_;
                }
            }
            if (ok && (!inv || acc.num_ != 0)) {
                if (inv) return integer(1) / acc;
                return acc;
            }
        }
        return real(std::pow(val_, (double)e));
    }

    bool operator==(const Number& o) const {
        if (exact_ != o.exact_) return false;
        if (exact_) return num_ == o.num_ && den_ == o.den_;
        std::uint64_t a, b;
        std::memcpy(&a, &val_, 8);
        std::memcpy(&b, &o.val_, 8);
        return a == b;
    }
    bool operator!=(const Number& o) const { return !(*this == o); }

    std::size_t hash() const {
        std::uint64_t bits;
        if (exact_) {
            bits = (std::uint64_t)num_ * 0x9E3779B97F4A7C15ull ^ (std::uint64_t)den_;
        } else {
            std::memcpy(&bits, &val_, 8);
            bits ^= 0xABCDEF0123456789ull;
        }
        return std::hash<std::uint64_t>{}(bits);
    }

    std::string str() const;

  private:
    Number(std::int64_t n, std::int64_t d) : exact_(true) {
        if (d < 0) {
            n = -n;
            d = -d;
        }
        std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) {
            n /= g;
            d /= g;
        }
        num_ = n;
        den_ = d == 0 ? 1 : d;
        val_ = (double)n / (double)(d == 0 ? 1 : d);
    }

    static Number from_i128(__int128 n, __int128 d, double approx) {
        if (d < 0) {
            n = -n;
            d = -d;
        }
        __int128 an = n < 0 ? -n : n;
        // gcd on 128-bit intermediates before the overflow check
        __int128 a = an, b = d;
        while (b) {
            __int128 r = a % b;
            a = b;
            b = r;
        }
        if (a > 1) {
            n /= a;
            d /= a;
        }
        constexpr __int128 lim = (__int128)1 << 62;
        if (n > lim || n < -lim || d > lim || d == 0) return real(approx);
        return Number((std::int64_t)n, (std::int64_t)d);
    }

    bool exact_;
    std::int64_t num_, den_;
    double val_;
};

}  // namespace pburg
