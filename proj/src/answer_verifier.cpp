#include "pns/answer_verifier.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "pns/response_parser.hpp"

namespace pns {
namespace {

constexpr std::array<std::string_view, 9> kStylingMacros = {
    "\\text{",   "\\textbf{", "\\textit{", "\\textrm{", "\\mathrm{",
    "\\mathbf{", "\\mathit{", "\\boldsymbol{", "\\mbox{"};

constexpr std::array<std::string_view, 3> kFracMacros = {"\\frac{", "\\dfrac{", "\\tfrac{"};

// Index of the brace closing the group opened just before `start`, or npos.
std::size_t matching_brace(std::string_view s, std::size_t start) {
  int depth = 1;
  for (std::size_t i = start; i < s.size(); ++i) {
    if (s[i] == '{') {
      ++depth;
    } else if (s[i] == '}' && --depth == 0) {
      return i;
    }
  }
  return std::string_view::npos;
}

std::string_view strip_dollars(std::string_view s) {
  if (s.size() >= 4 && s.substr(0, 2) == "$$" && s.substr(s.size() - 2) == "$$") {
    return trim_ascii(s.substr(2, s.size() - 4));
  }
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    return trim_ascii(s.substr(1, s.size() - 2));
  }
  return s;
}

std::string_view strip_styling(std::string_view s) {
  for (auto macro : kStylingMacros) {
    if (s.substr(0, macro.size()) != macro) continue;
    if (matching_brace(s, macro.size()) == s.size() - 1) {
      return trim_ascii(s.substr(macro.size(), s.size() - macro.size() - 1));
    }
  }
  return s;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return neg ? -v : v;
}

std::optional<Rational> reduce(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    if (num == INT64_MIN || den == INT64_MIN) return std::nullopt;
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num, den);
  if (g == 0) g = 1;
  return Rational{num / g, den / g};
}

std::optional<Rational> parse_decimal(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  auto whole = s.substr(0, dot);
  auto frac = s.substr(dot + 1);
  if (whole.empty() && frac.empty()) return std::nullopt;
  if ((!whole.empty() && !all_digits(whole)) || (!frac.empty() && !all_digits(frac))) {
    return std::nullopt;
  }
  while (!frac.empty() && frac.back() == '0') frac.remove_suffix(1);
  if (frac.size() > 18) return std::nullopt;
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  std::int64_t w = 0, f = 0;
  if (!whole.empty()) {
    auto r = std::from_chars(whole.data(), whole.data() + whole.size(), w);
    if (r.ec != std::errc()) return std::nullopt;
  }
  if (!frac.empty()) {
    auto r = std::from_chars(frac.data(), frac.data() + frac.size(), f);
    if (r.ec != std::errc()) return std::nullopt;
  }
  std::int64_t num = 0;
  if (__builtin_mul_overflow(w, den, &num) || __builtin_add_overflow(num, f, &num)) {
    return std::nullopt;
  }
  return reduce(neg ? -num : num, den);
}

std::optional<Rational> parse_frac(std::string_view s) {
  bool neg = false;
  if (!s.empty() && s.front() == '-') {
    neg = true;
    s = trim_ascii(s.substr(1));
  }
  for (auto macro : kFracMacros) {
    if (s.substr(0, macro.size()) != macro) continue;
    auto num_end = matching_brace(s, macro.size());
    if (num_end == std::string_view::npos || num_end + 1 >= s.size() || s[num_end + 1] != '{') {
      return std::nullopt;
    }
    auto den_end = matching_brace(s, num_end + 2);
    if (den_end != s.size() - 1) return std::nullopt;
    auto num = parse_int(trim_ascii(s.substr(macro.size(), num_end - macro.size())));
    auto den = parse_int(trim_ascii(s.substr(num_end + 2, den_end - num_end - 2)));
    if (!num || !den) return std::nullopt;
    return reduce(neg ? -*num : *num, *den);
  }
  return std::nullopt;
}

std::optional<Rational> parse_rational(std::string_view s) {
  if (auto i = parse_int(s)) return Rational{*i, 1};
  if (auto d = parse_decimal(s)) return d;
  return parse_frac(s);
}

std::string render(const Rational& r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

}  // namespace

std::string normalize_answer(std::string_view raw) {
  std::string_view s = trim_ascii(raw);
  s = strip_dollars(s);
  s = strip_styling(s);
  std::string cleaned = collapse_whitespace(s);
  if (auto r = parse_rational(cleaned)) return render(*r);
  return cleaned;
}

std::optional<double> numeric_value(std::string_view raw) {
  const std::string canon = normalize_answer(raw);
  if (canon.empty()) return std::nullopt;
  auto slash = canon.find('/');
  if (slash != std::string::npos) {
    auto num = parse_int(std::string_view(canon).substr(0, slash));
    auto den = parse_int(std::string_view(canon).substr(slash + 1));
    if (num && den && *den != 0) return static_cast<double>(*num) / static_cast<double>(*den);
  }
  double v = 0.0;
  const char* first = canon.data();
  const char* last = canon.data() + canon.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool answers_equivalent(std::string_view a, std::string_view b, double rel_tol) {
  if (!(rel_tol > 0.0)) throw InvalidInput("answers_equivalent: rel_tol must be > 0");
  if (normalize_answer(a) == normalize_answer(b)) return true;
  auto va = numeric_value(a);
  auto vb = numeric_value(b);
  if (!va || !vb) return false;
  const double scale = std::max({1.0, std::fabs(*va), std::fabs(*vb)});
  return std::fabs(*va - *vb) <= rel_tol * scale;
}

int accuracy_score(const ParsedResponse& parsed, const GroundTruth& gt, const PnsConfig& cfg) {
  if (gt.answer.empty()) throw InvalidInput("ground truth answer must be non-empty");
  auto answer = extract_final_answer(parsed);
  if (!answer) return 0;
  return answers_equivalent(*answer, gt.answer, cfg.answer_rel_tol) ? 1 : 0;
}

}  // namespace pns
