#include "pburg/expr.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "pburg/errors.hpp"

namespace pburg {

// ---------------------------------------------------------------------------
// Node storage
// ---------------------------------------------------------------------------

struct Expr::Node {
    ExprKind kind;
    Number value;               // constant payload / power exponent
    Var var = Var::t;           // variable payload
    std::vector<Expr> kids;
};

namespace {

std::shared_ptr<const Expr::Node> alloc(ExprKind k, Number value, Var var, std::vector<Expr> kids) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = k;
    n->value = value;
    n->var = var;
    n->kids = std::move(kids);
    return n;
}

}  // namespace

Expr::Expr() : node_(alloc(ExprKind::constant, Number::integer(0), Var::t, {})) {}

Expr Expr::constant(Number n) { return Expr(alloc(ExprKind::constant, n, Var::t, {})); }

Expr Expr::variable(Var v) { return Expr(alloc(ExprKind::variable, Number(), v, {})); }

Expr Expr::sum(std::vector<Expr> terms) {
    if (terms.empty()) return Expr();
    if (terms.size() == 1) return terms[0];
    return Expr(alloc(ExprKind::sum, Number(), Var::t, std::move(terms)));
}

Expr Expr::product(std::vector<Expr> factors) {
    if (factors.empty()) return integer(1);
    if (factors.size() == 1) return factors[0];
    return Expr(alloc(ExprKind::product, Number(), Var::t, std::move(factors)));
}

Expr Expr::quotient(Expr num, Expr den) {
    if (num.is_constant() && den.is_constant() && !den.value().is_zero())
        return constant(num.value() / den.value());
    return Expr(alloc(ExprKind::quotient, Number(), Var::t, {std::move(num), std::move(den)}));
}

Expr Expr::pow(Expr base, Number exponent) {
    return Expr(alloc(ExprKind::power, exponent, Var::t, {std::move(base)}));
}

Expr Expr::neg(Expr e) {
    if (e.is_constant()) return constant(-e.value());
    return Expr(alloc(ExprKind::negate, Number(), Var::t, {std::move(e)}));
}

Expr Expr::exp(Expr e) { return Expr(alloc(ExprKind::exp_fn, Number(), Var::t, {std::move(e)})); }
Expr Expr::ln(Expr e) { return Expr(alloc(ExprKind::ln_fn, Number(), Var::t, {std::move(e)})); }
Expr Expr::sqrt(Expr e) { return Expr(alloc(ExprKind::sqrt_fn, Number(), Var::t, {std::move(e)})); }
Expr Expr::abs(Expr e) { return Expr(alloc(ExprKind::abs_fn, Number(), Var::t, {std::move(e)})); }

ExprKind Expr::kind() const { return node_->kind; }
const Number& Expr::value() const { return node_->value; }
Var Expr::var() const { return node_->var; }
const Number& Expr::exponent() const { return node_->value; }
const std::vector<Expr>& Expr::children() const { return node_->kids; }

bool Expr::depends_on(Var v) const {
    if (kind() == ExprKind::variable) return var() == v;
    for (const Expr& k : children())
        if (k.depends_on(v)) return true;
    return false;
}

std::size_t Expr::node_count() const {
    std::size_t n = 1;
    for (const Expr& k : children()) n += k.node_count();
    return n;
}

bool Expr::same(const Expr& other) const {
    if (node_ == other.node_) return true;
    if (kind() != other.kind()) return false;
    switch (kind()) {
        case ExprKind::constant: return value() == other.value();
        case ExprKind::variable: return var() == other.var();
        case ExprKind::power:
            if (exponent() != other.exponent()) return false;
            break;
        default: break;
    }
    const auto& a = children();
    const auto& b = other.children();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!a[i].same(b[i])) return false;
    return true;
}

std::size_t Expr::hash() const {
    std::size_t h = (std::size_t)kind() * 0x9E3779B97F4A7C15ull;
    switch (kind()) {
        case ExprKind::constant: h ^= value().hash(); break;
        case ExprKind::variable: h ^= (std::size_t)var() + 0x1234; break;
        case ExprKind::power: h ^= exponent().hash(); break;
        default: break;
    }
    for (const Expr& k : children()) h = h * 1099511628211ull ^ k.hash();
    return h;
}

// ---------------------------------------------------------------------------
// Printing. The printer parenthesizes so that parse(str()) reproduces the
// exact tree: nested same-level n-ary nodes are wrapped, quotients keep their
// left associativity, and unary minus binds tighter than '*' but looser
// than '^'.
// ---------------------------------------------------------------------------

std::string Number::str() const {
    if (exact_) {
        std::string s = std::to_string(num_);
        if (den_ != 1) s += "/" + std::to_string(den_);
        return s;
    }
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), val_);
    return std::string(buf, res.ptr);
}

namespace {

std::string print(const Expr& e);

bool is_negative_constant(const Expr& e) { return e.is_constant() && e.value().negative(); }

bool needs_parens_in_product(const Expr& child, bool first) {
    switch (child.kind()) {
        case ExprKind::sum:
        case ExprKind::product: return true;
        case ExprKind::quotient: return !first;
        default: return false;
    }
}

std::string print_sum_operand(const Expr& e) {
    if (e.kind() == ExprKind::sum) return "(" + print(e) + ")";
    return print(e);
}

std::string print(const Expr& e) {
    switch (e.kind()) {
        case ExprKind::constant: return e.value().str();
        case ExprKind::variable:
            switch (e.var()) {
                case Var::t: return "t";
                case Var::x: return "x";
                default: return "v";
            }
        case ExprKind::sum: {
            std::string out;
            const auto& kids = e.children();
            for (std::size_t i = 0; i < kids.size(); ++i) {
                const Expr& k = kids[i];
                if (i == 0) {
                    out += print_sum_operand(k);
                } else if (k.kind() == ExprKind::negate) {
                    out += " - " + print_sum_operand(k.children()[0]);
                } else if (is_negative_constant(k)) {
                    out += " - " + (-k.value()).str();
                } else {
                    out += " + " + print_sum_operand(k);
                }
            }
            return out;
        }
        case ExprKind::product: {
            std::string out;
            const auto& kids = e.children();
            for (std::size_t i = 0; i < kids.size(); ++i) {
                if (i) out += "*";
                if (needs_parens_in_product(kids[i], i == 0))
                    out += "(" + print(kids[i]) + ")";
                else
                    out += print(kids[i]);
            }
            return out;
        }
        case ExprKind::quotient: {
            const Expr& a = e.children()[0];
            const Expr& b = e.children()[1];
            std::string num = a.kind() == ExprKind::sum ? "(" + print(a) + ")" : print(a);
            bool pd = b.kind() == ExprKind::sum || b.kind() == ExprKind::product ||
                      b.kind() == ExprKind::quotient;
            std::string den = pd ? "(" + print(b) + ")" : print(b);
            return num + "/" + den;
        }
        case ExprKind::power: {
            const Expr& b = e.children()[0];
            bool pb = !(b.kind() == ExprKind::variable ||
                        (b.is_constant() && !b.value().negative()) ||
                        b.kind() == ExprKind::exp_fn || b.kind() == ExprKind::ln_fn ||
                        b.kind() == ExprKind::sqrt_fn || b.kind() == ExprKind::abs_fn);
            std::string base = pb ? "(" + print(b) + ")" : print(b);
            const Number& r = e.exponent();
            if (r.exact() && r.den() == 1 && r.num() >= 0)
                return base + "^" + r.str();
            return base + "^(" + r.str() + ")";
        }
        case ExprKind::negate: {
            const Expr& u = e.children()[0];
            bool p = u.kind() == ExprKind::sum || u.kind() == ExprKind::product ||
                     u.kind() == ExprKind::quotient;
            return p ? "-(" + print(u) + ")" : "-" + print(u);
        }
        case ExprKind::exp_fn: return "exp(" + print(e.children()[0]) + ")";
        case ExprKind::ln_fn: return "ln(" + print(e.children()[0]) + ")";
        case ExprKind::sqrt_fn: return "sqrt(" + print(e.children()[0]) + ")";
        case ExprKind::abs_fn: return "abs(" + print(e.children()[0]) + ")";
    }
    return "?";
}

}  // namespace

std::string Expr::str() const { return print(*this); }

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
    enum Type { number, ident, op, end } type = end;
    Number num;
    std::string text;
    char symbol = 0;
    std::size_t offset = 0;
};

class Lexer {
  public:
    explicit Lexer(std::string_view s) : s_(s) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

  private:
    void advance() {
        while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
        tok_ = Token{};
        tok_.offset = pos_;
        if (pos_ >= s_.size()) {
            tok_.type = Token::end;
            return;
        }
        char c = s_[pos_];
        if (std::isdigit((unsigned char)c) || c == '.') {
            lex_number();
            return;
        }
        if (std::isalpha((unsigned char)c) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum((unsigned char)s_[pos_]) || s_[pos_] == '_'))
                ++pos_;
            tok_.type = Token::ident;
            tok_.text = std::string(s_.substr(start, pos_ - start));
            return;
        }
        if (std::string_view("+-*/^()").find(c) != std::string_view::npos) {
            tok_.type = Token::op;
            tok_.symbol = c;
            ++pos_;
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    void lex_number() {
        std::size_t start = pos_;
        bool has_dot = false, has_exp = false;
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (std::isdigit((unsigned char)c)) {
                ++pos_;
            } else if (c == '.' && !has_dot && !has_exp) {
                has_dot = true;
                ++pos_;
            } else if ((c == 'e' || c == 'E') && pos_ + 1 < s_.size() &&
                       (std::isdigit((unsigned char)s_[pos_ + 1]) ||
                        ((s_[pos_ + 1] == '+' || s_[pos_ + 1] == '-') && pos_ + 2 < s_.size() &&
                         std::isdigit((unsigned char)s_[pos_ + 2])))) {
                has_exp = true;
                pos_ += 2;  // consume 'e' and sign-or-digit
                while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) ++pos_;
                break;
            } else {
                break;
            }
        }
        std::string text(s_.substr(start, pos_ - start));
        if (text == ".") throw ParseError("malformed number", start);
        tok_.type = Token::number;
        if (!has_dot && !has_exp) {
            errno = 0;
            char* endp = nullptr;
            long long v = std::strtoll(text.c_str(), &endp, 10);
            if (errno == 0 && endp == text.c_str() + text.size()) {
                tok_.num = Number::integer(v);
                return;
            }
        }
        tok_.num = Number::real(std::strtod(text.c_str(), nullptr));
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    Token tok_;
};

class Parser {
  public:
    explicit Parser(std::string_view s) : lex_(s) {}

    Expr run() {
        if (lex_.peek().type == Token::end) throw ParseError("empty input", 0);
        Expr e = expression();
        if (lex_.peek().type != Token::end)
            throw ParseError("unexpected trailing input", lex_.peek().offset);
        return e;
    }

  private:
    bool at_op(char c) const { return lex_.peek().type == Token::op && lex_.peek().symbol == c; }

    Expr expression() {
        std::vector<Expr> terms;
        terms.push_back(term());
        while (at_op('+') || at_op('-')) {
            char op = lex_.take().symbol;
            Expr t = term();
            terms.push_back(op == '-' ? Expr::neg(t) : t);
        }
        return Expr::sum(std::move(terms));
    }

    Expr term() {
        std::vector<Expr> factors;
        factors.push_back(unary());
        while (at_op('*') || at_op('/')) {
            char op = lex_.take().symbol;
            if (op == '*') {
                factors.push_back(unary());
            } else {
                Expr lhs = Expr::product(std::move(factors));
                factors.clear();
                factors.push_back(Expr::quotient(std::move(lhs), unary()));
            }
        }
        return Expr::product(std::move(factors));
    }

    Expr unary() {
        if (at_op('-')) {
            lex_.take();
            return Expr::neg(unary());
        }
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (at_op('^')) {
            std::size_t off = lex_.peek().offset;
            lex_.take();
            Expr e = unary();
            if (!e.is_constant())
                throw ParseError("exponent must be a rational constant", off);
            return Expr::pow(std::move(base), e.value());
        }
        return base;
    }

    Expr atom() {
        const Token& tk = lex_.peek();
        if (tk.type == Token::number) return Expr::constant(lex_.take().num);
        if (tk.type == Token::ident) {
            Token id = lex_.take();
            if (id.text == "t") return Expr::t();
            if (id.text == "x") return Expr::x();
            if (id.text == "v" || id.text == "u") return Expr::w();
            if (id.text == "exp" || id.text == "ln" || id.text == "sqrt" || id.text == "abs") {
                if (!at_op('(')) throw ParseError("expected '(' after " + id.text, lex_.peek().offset);
                lex_.take();
                Expr arg = expression();
                if (!at_op(')')) throw ParseError("expected ')'", lex_.peek().offset);
                lex_.take();
                if (id.text == "exp") return Expr::exp(std::move(arg));
                if (id.text == "ln") return Expr::ln(std::move(arg));
                if (id.text == "sqrt") return Expr::sqrt(std::move(arg));
                return Expr::abs(std::move(arg));
            }
            throw ParseError("unknown identifier '" + id.text + "'", id.offset);
        }
        if (at_op('(')) {
            lex_.take();
            Expr e = expression();
            if (!at_op(')')) throw ParseError("expected ')'", lex_.peek().offset);
            lex_.take();
            return e;
        }
        throw ParseError("expected expression", tk.offset);
    }

    Lexer lex_;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

Expr differentiate(const Expr& e, Var v) {
    switch (e.kind()) {
        case ExprKind::constant: return Expr();
        case ExprKind::variable: return e.var() == v ? Expr::integer(1) : Expr();
        case ExprKind::sum: {
            std::vector<Expr> out;
            for (const Expr& k : e.children()) {
                Expr d = differentiate(k, v);
                if (!d.is_zero()) out.push_back(std::move(d));
            }
            return Expr::sum(std::move(out));
        }
        case ExprKind::product: {
            std::vector<Expr> terms;
            const auto& kids = e.children();
            for (std::size_t i = 0; i < kids.size(); ++i) {
                Expr d = differentiate(kids[i], v);
                if (d.is_zero()) continue;
                std::vector<Expr> fac;
                for (std::size_t j = 0; j < kids.size(); ++j)
                    fac.push_back(i == j ? d : kids[j]);
                terms.push_back(Expr::product(std::move(fac)));
            }
            return Expr::sum(std::move(terms));
        }
        case ExprKind::quotient: {
            const Expr& a = e.children()[0];
            const Expr& b = e.children()[1];
            Expr da = differentiate(a, v), db = differentiate(b, v);
            if (db.is_zero()) return Expr::quotient(da, b);
            Expr num = Expr::product({da, b}) - Expr::product({a, db});
            return Expr::quotient(std::move(num), Expr::pow(b, Number::integer(2)));
        }
        case ExprKind::power: {
            const Expr& b = e.children()[0];
            Expr db = differentiate(b, v);
            if (db.is_zero()) return Expr();
            Number r = e.exponent();
            return Expr::product(
                {Expr::constant(r), Expr::pow(b, r - Number::integer(1)), std::move(db)});
        }
        case ExprKind::negate: return Expr::neg(differentiate(e.children()[0], v));
        case ExprKind::exp_fn: {
            Expr du = differentiate(e.children()[0], v);
            if (du.is_zero()) return Expr();
            return Expr::product({e, std::move(du)});
        }
        case ExprKind::ln_fn: {
            const Expr& u = e.children()[0];
            // ln|y| has derivative y'/y off y = 0
            const Expr& y = u.kind() == ExprKind::abs_fn ? u.children()[0] : u;
            Expr dy = differentiate(y, v);
            if (dy.is_zero()) return Expr();
            return Expr::quotient(std::move(dy), y);
        }
        case ExprKind::sqrt_fn: {
            const Expr& u = e.children()[0];
            Expr du = differentiate(u, v);
            if (du.is_zero()) return Expr();
            return Expr::quotient(std::move(du), Expr::product({Expr::integer(2), e}));
        }
        case ExprKind::abs_fn: {
            const Expr& u = e.children()[0];
            Expr du = differentiate(u, v);
            if (du.is_zero()) return Expr();
            return Expr::product({Expr::quotient(u, e), std::move(du)});
        }
    }
    return Expr();
}

// ---------------------------------------------------------------------------
// Evaluation (double and second-order jets share one recursion)
// ---------------------------------------------------------------------------

namespace {

inline double value_of(double s) { return s; }
inline double value_of(const D2& s) { return s.v; }

template <class S>
S make_const(double v);
template <>
double make_const<double>(double v) {
    return v;
}
template <>
D2 make_const<D2>(double v) {
    return D2::constant(v);
}

inline double pow_s(double b, double r) { return std::pow(b, r); }
inline D2 pow_s(const D2& b, double r) { return pow(b, r); }

inline double exp(double x) { return std::exp(x); }
inline double ln(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::fabs(x); }

template <class S>
S eval_rec(const Expr& e, const std::array<const S*, 3>& vars) {
    switch (e.kind()) {
        case ExprKind::constant: return make_const<S>(e.value().value());
        case ExprKind::variable: {
            const S* p = vars[(int)e.var()];
            if (!p) throw EvalError("unbound variable", e.str());
            return *p;
        }
        case ExprKind::sum: {
            S acc = eval_rec(e.children()[0], vars);
            for (std::size_t i = 1; i < e.children().size(); ++i)
                acc = acc + eval_rec(e.children()[i], vars);
            return acc;
        }
        case ExprKind::product: {
            S acc = eval_rec(e.children()[0], vars);
            for (std::size_t i = 1; i < e.children().size(); ++i)
                acc = acc * eval_rec(e.children()[i], vars);
            return acc;
        }
        case ExprKind::quotient: {
            S a = eval_rec(e.children()[0], vars);
            S b = eval_rec(e.children()[1], vars);
            if (value_of(b) == 0.0) throw EvalError("division by zero", e.str());
            return a / b;
        }
        case ExprKind::power: {
            S b = eval_rec(e.children()[0], vars);
            const Number& r = e.exponent();
            double bv = value_of(b);
            bool integral = r.exact() ? r.den() == 1 : r.value() == std::floor(r.value());
            if (bv == 0.0 && (r.value() < 0.0 || r.value() == 0.0))
                throw EvalError("zero base with nonpositive exponent", e.str());
            if (bv < 0.0 && !integral)
                throw EvalError("negative base with non-integer exponent", e.str());
            return pow_s(b, r.value());
        }
        case ExprKind::negate: return -eval_rec(e.children()[0], vars);
        case ExprKind::exp_fn: return exp(eval_rec(e.children()[0], vars));
        case ExprKind::ln_fn: {
            S u = eval_rec(e.children()[0], vars);
            if (value_of(u) <= 0.0) throw EvalError("ln of nonpositive argument", e.str());
            return ln(u);
        }
        case ExprKind::sqrt_fn: {
            S u = eval_rec(e.children()[0], vars);
            if (value_of(u) < 0.0) throw EvalError("sqrt of negative argument", e.str());
            if (value_of(u) == 0.0 && !std::is_same_v<S, double>)
                throw EvalError("sqrt jet at zero", e.str());
            return sqrt(u);
        }
        case ExprKind::abs_fn: return abs(eval_rec(e.children()[0], vars));
    }
    throw EvalError("unknown node", e.str());
}

}  // namespace

double evaluate(const Expr& e, const Bindings& b) {
    double tv = b.t.value_or(0), xv = b.x.value_or(0), wv = b.w.value_or(0);
    std::array<const double*, 3> vars = {b.t ? &tv : nullptr, b.x ? &xv : nullptr,
                                         b.w ? &wv : nullptr};
    double r = eval_rec<double>(e, vars);
    if (!std::isfinite(r)) throw EvalError("non-finite result", e.str());
    return r;
}

D2 evaluate_jet(const Expr& e, const D2& t, const D2& x, const D2& w) {
    std::array<const D2*, 3> vars = {&t, &x, &w};
    return eval_rec<D2>(e, vars);
}

// ---------------------------------------------------------------------------
// Polynomial view
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxPolyTerms = 400;
constexpr int kMaxPolyDegree = 60;

using Mono = std::array<int, 3>;

void poly_prune(PolyMap& p) {
    for (auto it = p.begin(); it != p.end();)
        it = it->second.is_zero() ? p.erase(it) : std::next(it);
}

std::optional<PolyMap> poly_mul(const PolyMap& a, const PolyMap& b) {
    if (a.size() * b.size() > (std::size_t)kMaxPolyTerms * 4) return std::nullopt;
    PolyMap out;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b) {
            Mono m{ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]};
            if (m[0] > kMaxPolyDegree || m[1] > kMaxPolyDegree || m[2] > kMaxPolyDegree)
                return std::nullopt;
            auto [it, inserted] = out.emplace(m, ca * cb);
            if (!inserted) it->second = it->second + ca * cb;
        }
    if (out.size() > (std::size_t)kMaxPolyTerms) return std::nullopt;
    poly_prune(out);
    return out;
}

}  // namespace

std::optional<PolyMap> try_polynomial(const Expr& e) {
    switch (e.kind()) {
        case ExprKind::constant: {
            PolyMap p;
            if (!e.value().is_zero()) p.emplace(Mono{0, 0, 0}, e.value());
            return p;
        }
        case ExprKind::variable: {
            PolyMap p;
            Mono m{0, 0, 0};
            m[(int)e.var()] = 1;
            p.emplace(m, Number::integer(1));
            return p;
        }
        case ExprKind::sum: {
            PolyMap acc;
            for (const Expr& k : e.children()) {
                auto pk = try_polynomial(k);
                if (!pk) return std::nullopt;
                for (const auto& [m, c] : *pk) {
                    auto [it, inserted] = acc.emplace(m, c);
                    if (!inserted) it->second = it->second + c;
                }
                if (acc.size() > (std::size_t)kMaxPolyTerms) return std::nullopt;
            }
            poly_prune(acc);
            return acc;
        }
        case ExprKind::product: {
            PolyMap acc;
            acc.emplace(Mono{0, 0, 0}, Number::integer(1));
            for (const Expr& k : e.children()) {
                auto pk = try_polynomial(k);
                if (!pk) return std::nullopt;
                auto m = poly_mul(acc, *pk);
                if (!m) return std::nullopt;
                acc = std::move(*m);
            }
            return acc;
        }
        case ExprKind::quotient: {
            auto pa = try_polynomial(e.children()[0]);
            auto pb = try_polynomial(e.children()[1]);
            if (!pa || !pb) return std::nullopt;
            if (pb->size() != 1 || pb->begin()->first != Mono{0, 0, 0}) return std::nullopt;
            Number d = pb->begin()->second;
            if (d.is_zero()) return std::nullopt;
            for (auto& [m, c] : *pa) c = c / d;
            return pa;
        }
        case ExprKind::power: {
            const Number& r = e.exponent();
            if (!r.exact() || r.den() != 1 || r.num() < 0 || r.num() > 30) return std::nullopt;
            auto pb = try_polynomial(e.children()[0]);
            if (!pb) return std::nullopt;
            PolyMap acc;
            acc.emplace(Mono{0, 0, 0}, Number::integer(1));
            for (std::int64_t i = 0; i < r.num(); ++i) {
                auto m = poly_mul(acc, *pb);
                if (!m) return std::nullopt;
                acc = std::move(*m);
            }
            return acc;
        }
        case ExprKind::negate: {
            auto p = try_polynomial(e.children()[0]);
            if (!p) return std::nullopt;
            for (auto& [m, c] : *p) c = -c;
            return p;
        }
        default: return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

namespace {

struct Term {
    Number coeff = Number::integer(1);
    Expr core = Expr::integer(1);  // core is not a constant unless it is 1
};

Expr rebuild_term(const Term& t) {
    if (t.core.is_one()) return Expr::constant(t.coeff);
    if (t.coeff.is_one()) return t.core;
    if ((-t.coeff).is_one()) return Expr::neg(t.core);
    return Expr::product({Expr::constant(t.coeff), t.core});
}

Expr simp_rec(const Expr& e);

/// Splits into (constant coefficient, residual factor), absorbing negations
/// and constant factors of products.
Term split_term(const Expr& e) {
    Term t;
    if (e.is_constant()) {
        t.coeff = e.value();
        return t;
    }
    if (e.kind() == ExprKind::negate) {
        Term inner = split_term(e.children()[0]);
        inner.coeff = -inner.coeff;
        return inner;
    }
    if (e.kind() == ExprKind::product) {
        std::vector<Expr> rest;
        Number c = Number::integer(1);
        for (const Expr& k : e.children()) {
            if (k.is_constant())
                c = c * k.value();
            else if (k.kind() == ExprKind::negate) {
                c = -c;
                rest.push_back(k.children()[0]);
            } else
                rest.push_back(k);
        }
        t.coeff = c;
        t.core = Expr::product(std::move(rest));
        return t;
    }
    t.core = e;
    return t;
}

void collect_terms(const Expr& e, bool negated, std::vector<Term>& out) {
    if (e.kind() == ExprKind::sum) {
        for (const Expr& k : e.children()) collect_terms(k, negated, out);
        return;
    }
    if (e.kind() == ExprKind::negate) {
        collect_terms(e.children()[0], !negated, out);
        return;
    }
    Term t = split_term(e);
    if (negated) t.coeff = -t.coeff;
    if (!t.coeff.is_zero()) out.push_back(std::move(t));
}

Expr monomial_expr(const Mono& m, const Number& c) {
    std::vector<Expr> factors;
    bool coeff_shown = !c.is_one() || (m[0] == 0 && m[1] == 0 && m[2] == 0);
    if (coeff_shown) factors.push_back(Expr::constant(c));
    const Var vars[3] = {Var::t, Var::x, Var::w};
    for (int i = 0; i < 3; ++i) {
        if (m[i] == 1)
            factors.push_back(Expr::variable(vars[i]));
        else if (m[i] > 1)
            factors.push_back(Expr::pow(Expr::variable(vars[i]), Number::integer(m[i])));
    }
    return Expr::product(std::move(factors));
}

Expr poly_expr(const PolyMap& p) {
    if (p.empty()) return Expr();
    std::vector<Expr> terms;
    // highest monomial first
    for (auto it = p.rbegin(); it != p.rend(); ++it) terms.push_back(monomial_expr(it->first, it->second));
    return Expr::sum(std::move(terms));
}

/// x-monomial view of a term core: degree k and the x-free cofactor, or
/// nullopt when x occurs inside a non-monomial factor.
std::optional<std::pair<int, Expr>> x_monomial(const Expr& core) {
    auto factor_degree = [](const Expr& f) -> std::optional<int> {
        if (f.kind() == ExprKind::variable && f.var() == Var::x) return 1;
        if (f.kind() == ExprKind::power && f.children()[0].kind() == ExprKind::variable &&
            f.children()[0].var() == Var::x) {
            const Number& r = f.exponent();
            if (r.exact() && r.den() == 1 && r.num() >= 1 && r.num() <= kMaxPolyDegree)
                return (int)r.num();
        }
        return std::nullopt;
    };
    if (!core.depends_on(Var::x)) return std::make_pair(0, core);
    if (auto d = factor_degree(core)) return std::make_pair(*d, Expr::integer(1));
    if (core.kind() != ExprKind::product) return std::nullopt;
    int k = 0;
    std::vector<Expr> rest;
    for (const Expr& f : core.children()) {
        if (auto d = factor_degree(f)) {
            k += *d;
        } else if (f.depends_on(Var::x)) {
            return std::nullopt;
        } else {
            rest.push_back(f);
        }
    }
    return std::make_pair(k, Expr::product(std::move(rest)));
}

/// Merges terms with structurally equal cores and folds the constant part.
/// Never recurses back into the sum simplifier.
std::vector<Term> combine_terms(const std::vector<Term>& in) {
    std::vector<Term> out;
    Number constant = Number::integer(0);
    bool saw_constant = false;
    for (const Term& t : in) {
        if (t.core.is_one()) {
            constant = constant + t.coeff;
            saw_constant = true;
            continue;
        }
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const Term& o) { return o.core.same(t.core); });
        if (it == out.end())
            out.push_back(t);
        else
            it->coeff = it->coeff + t.coeff;
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const Term& t) { return t.coeff.is_zero(); }),
              out.end());
    if (saw_constant && !constant.is_zero()) out.push_back({constant, Expr::integer(1)});
    return out;
}

/// Sum of terms as an expression: polynomial canonical form when the whole
/// group is polynomial, structural like-term merging otherwise.
Expr terms_to_expr(const std::vector<Term>& terms) {
    PolyMap acc;
    bool all_poly = true;
    for (const Term& t : terms) {
        auto p = try_polynomial(rebuild_term(t));
        if (!p || acc.size() > (std::size_t)kMaxPolyTerms) {
            all_poly = false;
            break;
        }
        for (const auto& [m, c] : *p) {
            auto [it, inserted] = acc.emplace(m, c);
            if (!inserted) it->second = it->second + c;
        }
    }
    if (all_poly) {
        poly_prune(acc);
        return poly_expr(acc);
    }
    std::vector<Expr> parts;
    for (const Term& t : combine_terms(terms)) parts.push_back(rebuild_term(t));
    if (parts.empty()) return Expr();
    return Expr::sum(std::move(parts));
}

Expr simplify_sum(const Expr& e) {
    std::vector<Term> terms;
    collect_terms(e, false, terms);

    // Fully polynomial sums get an exact canonical form.
    {
        PolyMap acc;
        bool all_poly = true;
        for (const Term& t : terms) {
            auto p = try_polynomial(rebuild_term(t));
            if (!p) {
                all_poly = false;
                break;
            }
            for (const auto& [m, c] : *p) {
                auto [it, inserted] = acc.emplace(m, c);
                if (!inserted) it->second = it->second + c;
            }
            if (acc.size() > (std::size_t)kMaxPolyTerms) {
                all_poly = false;
                break;
            }
        }
        if (all_poly) {
            poly_prune(acc);
            Expr canon = poly_expr(acc);
            if (canon.node_count() <= e.node_count()) return canon;
        }
    }

    // Otherwise group like monomials in x; coefficients stay expressions in t
    // (and w). Terms where x is buried inside a function are grouped by
    // structural equality only.
    struct XBucket {
        int k;
        std::vector<Term> parts;
    };
    std::vector<XBucket> xb;
    std::vector<Term> opaque;
    for (const Term& t : terms) {
        if (auto mono = x_monomial(t.core)) {
            auto it = std::find_if(xb.begin(), xb.end(),
                                   [&](const XBucket& b) { return b.k == mono->first; });
            if (it == xb.end()) {
                xb.push_back({mono->first, {}});
                it = std::prev(xb.end());
            }
            it->parts.push_back({t.coeff, mono->second});
        } else {
            opaque.push_back(t);
        }
    }
    std::sort(xb.begin(), xb.end(), [](const XBucket& a, const XBucket& b) { return a.k > b.k; });

    std::vector<Expr> out;
    for (const XBucket& b : xb) {
        Expr coeff = terms_to_expr(b.parts);
        if (coeff.is_zero()) continue;
        if (b.k == 0) {
            out.push_back(std::move(coeff));
            continue;
        }
        Expr xpow = b.k == 1 ? Expr::x() : Expr::pow(Expr::x(), Number::integer(b.k));
        if (coeff.is_one())
            out.push_back(std::move(xpow));
        else if (coeff.is_constant() && (-coeff.value()).is_one())
            out.push_back(Expr::neg(xpow));
        else
            out.push_back(Expr::product({std::move(coeff), std::move(xpow)}));
    }
    for (const Term& t : combine_terms(opaque)) out.push_back(rebuild_term(t));
    return Expr::sum(std::move(out));
}

Expr simplify_product(std::vector<Expr> kids) {
    Number coeff = Number::integer(1);
    std::vector<Expr> flat;
    auto absorb = [&](auto&& self, const Expr& k) -> void {
        if (k.is_constant()) {
            coeff = coeff * k.value();
        } else if (k.kind() == ExprKind::negate) {
            coeff = -coeff;
            self(self, k.children()[0]);
        } else if (k.kind() == ExprKind::product) {
            for (const Expr& kk : k.children()) self(self, kk);
        } else {
            flat.push_back(k);
        }
    };
    for (const Expr& k : kids) absorb(absorb, k);
    if (coeff.is_zero()) return Expr();

    // merge structurally equal bases into powers
    struct Base {
        Expr base;
        Number exp;
    };
    std::vector<Base> bases;
    for (const Expr& f : flat) {
        Expr b = f;
        Number r = Number::integer(1);
        if (f.kind() == ExprKind::power) {
            b = f.children()[0];
            r = f.exponent();
        }
        auto it = std::find_if(bases.begin(), bases.end(),
                               [&](const Base& e2) { return e2.base.same(b); });
        if (it == bases.end())
            bases.push_back({b, r});
        else
            it->exp = it->exp + r;
    }
    std::vector<Expr> out;
    for (const Base& b : bases) {
        if (b.exp.is_zero()) continue;  // y^0 on the common domain
        if (b.exp.is_one())
            out.push_back(b.base);
        else
            out.push_back(Expr::pow(b.base, b.exp));
    }
    if (out.empty()) return Expr::constant(coeff);
    if (coeff.is_one()) return Expr::product(std::move(out));
    if ((-coeff).is_one()) return Expr::neg(Expr::product(std::move(out)));
    std::vector<Expr> all;
    all.push_back(Expr::constant(coeff));
    for (Expr& o : out) all.push_back(std::move(o));
    return Expr::product(std::move(all));
}

Expr simp_rec(const Expr& e) {
    switch (e.kind()) {
        case ExprKind::constant:
        case ExprKind::variable: return e;
        case ExprKind::negate: {
            Expr u = simp_rec(e.children()[0]);
            if (u.is_constant()) return Expr::constant(-u.value());
            if (u.kind() == ExprKind::negate) return u.children()[0];
            return Expr::neg(std::move(u));
        }
        case ExprKind::sum: {
            std::vector<Expr> kids;
            for (const Expr& k : e.children()) kids.push_back(simp_rec(k));
            return simplify_sum(Expr::sum(std::move(kids)));
        }
        case ExprKind::product: {
            std::vector<Expr> kids;
            for (const Expr& k : e.children()) kids.push_back(simp_rec(k));
            return simplify_product(std::move(kids));
        }
        case ExprKind::quotient: {
            Expr a = simp_rec(e.children()[0]);
            Expr b = simp_rec(e.children()[1]);
            if (a.is_zero()) return Expr();
            if (b.is_one()) return a;
            if (b.is_constant() && !b.value().is_zero())
                return simp_rec(Expr::product(
                    {Expr::constant(Number::integer(1) / b.value()), std::move(a)}));
            return Expr::quotient(std::move(a), std::move(b));
        }
        case ExprKind::power: {
            Expr b = simp_rec(e.children()[0]);
            const Number& r = e.exponent();
            if (r.is_zero() && !(b.is_constant() && b.value().is_zero())) return Expr::integer(1);
            if (r.is_one()) return b;
            if (b.is_constant()) {
                const Number& c = b.value();
                if (r.exact() && r.den() == 1) return Expr::constant(c.pow_int(r.num()));
                if (!c.negative() && !c.is_zero())
                    return Expr::real(std::pow(c.value(), r.value()));
            }
            return Expr::pow(std::move(b), r);
        }
        case ExprKind::exp_fn: {
            Expr u = simp_rec(e.children()[0]);
            if (u.is_zero()) return Expr::integer(1);
            return Expr::exp(std::move(u));
        }
        case ExprKind::ln_fn: {
            Expr u = simp_rec(e.children()[0]);
            if (u.is_one()) return Expr();
            return Expr::ln(std::move(u));
        }
        case ExprKind::sqrt_fn: {
            Expr u = simp_rec(e.children()[0]);
            if (u.is_zero()) return Expr();
            if (u.is_one()) return Expr::integer(1);
            if (u.is_constant() && u.value().exact() && !u.value().negative()) {
                auto isq = [](std::int64_t n) -> std::optional<std::int64_t> {
                    if (n < 0) return std::nullopt;
                    auto r = (std::int64_t)std::llround(std::sqrt((double)n));
                    for (std::int64_t c = std::max<std::int64_t>(0, r - 1); c <= r + 1; ++c)
                        if (c * c == n) return c;
                    return std::nullopt;
                };
                auto sn = isq(u.value().num()), sd = isq(u.value().den());
                if (sn && sd) return Expr::constant(Number::rational(*sn, *sd));
            }
            if (u.is_constant() && !u.value().exact() && u.value().value() >= 0.0)
                return Expr::real(std::sqrt(u.value().value()));
            return Expr::sqrt(std::move(u));
        }
        case ExprKind::abs_fn: {
            Expr u = simp_rec(e.children()[0]);
            if (u.is_constant())
                return Expr::constant(u.value().negative() ? -u.value() : u.value());
            if (u.kind() == ExprKind::abs_fn) return u;
            if (u.kind() == ExprKind::negate) return Expr::abs(u.children()[0]);
            return Expr::abs(std::move(u));
        }
    }
    return e;
}

}  // namespace

Expr simplify(const Expr& e) {
    Expr s = simp_rec(e);
    return s.node_count() <= e.node_count() ? s : e;
}

Expr substitute(const Expr& e, const std::map<Var, Expr>& subs) {
    switch (e.kind()) {
        case ExprKind::constant: return e;
        case ExprKind::variable: {
            auto it = subs.find(e.var());
            return it == subs.end() ? e : it->second;
        }
        default: break;
    }
    std::vector<Expr> kids;
    for (const Expr& k : e.children()) kids.push_back(substitute(k, subs));
    switch (e.kind()) {
        case ExprKind::sum: return Expr::sum(std::move(kids));
        case ExprKind::product: return Expr::product(std::move(kids));
        case ExprKind::quotient: return Expr::quotient(std::move(kids[0]), std::move(kids[1]));
        case ExprKind::power: return Expr::pow(std::move(kids[0]), e.exponent());
        case ExprKind::negate: return Expr::neg(std::move(kids[0]));
        case ExprKind::exp_fn: return Expr::exp(std::move(kids[0]));
        case ExprKind::ln_fn: return Expr::ln(std::move(kids[0]));
        case ExprKind::sqrt_fn: return Expr::sqrt(std::move(kids[0]));
        case ExprKind::abs_fn: return Expr::abs(std::move(kids[0]));
        default: return e;
    }
}

// ---------------------------------------------------------------------------
// Probabilistic zero / constancy tests
// ---------------------------------------------------------------------------

namespace {

/// Magnitude of the largest cancelling contribution: for sums the sum of the
/// summand magnitudes, otherwise the value itself.
double local_scale(const Expr& e, const Bindings& b) {
    if (e.kind() == ExprKind::sum) {
        double s = 0;
        for (const Expr& k : e.children()) s += std::fabs(evaluate(k, b));
        return s;
    }
    if (e.kind() == ExprKind::negate) return local_scale(e.children()[0], b);
    return std::fabs(evaluate(e, b));
}

}  // namespace

bool probably_zero(const Expr& e, const SampleBox& box, double tol) {
    Expr s = simplify(e);
    if (s.is_constant()) {
        if (s.value().is_zero()) return true;
        // tiny nonzero constants fall through to the tolerance test
    }
    box.check();
    const int need = box.n;
    int got = 0, errors = 0;
    std::uint64_t idx = 0;
    const std::uint64_t max_attempts = 200ull * (std::uint64_t)need + 1000;
    while (got < need && idx < max_attempts) {
        auto p = box.point(idx++);
        if (!box.admitted(p)) continue;
        Bindings b{p[0], p[1], p[2]};
        double v, scale;
        try {
            v = evaluate(s, b);
            scale = local_scale(s, b);
        } catch (const EvalError&) {
            if (++errors > need / 2)
                throw IndeterminateError("zero test indeterminate: domain errors at >50% of samples");
            continue;
        }
        ++got;
        if (std::fabs(v) >= tol * (1.0 + scale)) return false;
    }
    if (got < need)
        throw IndeterminateError("zero test indeterminate: could not draw enough samples");
    return true;
}

std::optional<double> as_constant(const Expr& e, std::initializer_list<Var> vars,
                                  const SampleBox& box, double tol) {
    for (Var v : vars)
        if (!probably_zero(differentiate(e, v), box, tol)) return std::nullopt;
    std::uint64_t idx = 0;
    while (idx < 1000) {
        auto p = box.point(idx++);
        if (!box.admitted(p)) continue;
        return evaluate(simplify(e), Bindings{p[0], p[1], p[2]});
    }
    throw IndeterminateError("constancy test: no admissible sample point");
}

}  // namespace pburg
