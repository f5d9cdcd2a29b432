#pragma once

#include <cmath>
#include <vector>

#include "pburg/expr.hpp"
#include "pburg/sampling.hpp"

namespace pburg::test {

/// Random expression trees over {t, x, w} for property tests. Leaves and
/// operators are weighted so that trees stay evaluable on positive boxes.
class ExprGen {
  public:
    explicit ExprGen(std::uint64_t seed) : rng_(seed) {}

    Expr tree(int max_depth) {
        if (max_depth <= 0 || rng_.uniform01() < 0.35) return leaf();
        double r = rng_.uniform01();
        if (r < 0.22) return binary(max_depth, '+');
        if (r < 0.44) return binary(max_depth, '*');
        if (r < 0.54) return Expr::quotient(tree(max_depth - 1), nonzero_leafish(max_depth - 1));
        if (r < 0.64) return Expr::pow(tree(max_depth - 1), small_exponent());
        if (r < 0.72) return Expr::neg(tree(max_depth - 1));
        if (r < 0.80) return Expr::exp(small_arg(max_depth - 1));
        if (r < 0.88) return Expr::ln(positive_arg(max_depth - 1));
        if (r < 0.95) return Expr::sqrt(positive_arg(max_depth - 1));
        return Expr::abs(tree(max_depth - 1));
    }

    SplitMix64& rng() { return rng_; }

  private:
    Expr leaf() {
        double r = rng_.uniform01();
        if (r < 0.25) return Expr::t();
        if (r < 0.5) return Expr::x();
        if (r < 0.65) return Expr::w();
        if (r < 0.85) return Expr::integer((std::int64_t)std::floor(rng_.uniform(-3.0, 4.0)));
        return Expr::real(rng_.uniform(-2.0, 2.0));
    }

    Expr binary(int d, char op) {
        std::vector<Expr> kids;
        int n = rng_.uniform01() < 0.3 ? 3 : 2;
        for (int i = 0; i < n; ++i) kids.push_back(tree(d - 1));
        return op == '+' ? Expr::sum(std::move(kids)) : Expr::product(std::move(kids));
    }

    Expr nonzero_leafish(int d) {
        // denominators: keep away from zero on positive boxes
        double r = rng_.uniform01();
        if (r < 0.4) return Expr::t();
        if (r < 0.8) return Expr::x();
        return Expr::sum({tree(d), Expr::integer(5)});
    }

    Expr positive_arg(int d) {
        double r = rng_.uniform01();
        if (r < 0.35) return Expr::t();
        if (r < 0.7) return Expr::x();
        return Expr::abs(Expr::sum({tree(d), Expr::integer(3)}));
    }

    Expr small_arg(int d) {
        double r = rng_.uniform01();
        if (r < 0.5) return Expr::t();
        return Expr::product({Expr::rational(1, 4), tree(d)});
    }

    Number small_exponent() {
        double r = rng_.uniform01();
        if (r < 0.6) return Number::integer((std::int64_t)std::floor(rng_.uniform(0.0, 4.0)));
        if (r < 0.8) return Number::integer(-1);
        return Number::rational(1, 2);
    }

    SplitMix64 rng_;
};

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace pburg::test
