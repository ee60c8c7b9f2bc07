#include "fracvis/rational.hpp"

#include <ostream>
#include <stdexcept>

namespace fracvis {

Rat::Rat(long long n, long long d) {
  if (d == 0) throw std::invalid_argument("rational with zero denominator");
  mpz_class nz(static_cast<long>(n));
  mpz_class dz(static_cast<long>(d));
  v_ = mpq_class(nz, dz);
  v_.canonicalize();
}

Rat::Rat(const mpz_class& n, const mpz_class& d) {
  if (sgn(d) == 0) throw std::invalid_argument("rational with zero denominator");
  v_ = mpq_class(n, d);
  v_.canonicalize();
}

Rat Rat::parse(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty rational literal");
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    mpz_class n, d;
    if (n.set_str(text.substr(0, slash), 10) != 0 ||
        d.set_str(text.substr(slash + 1), 10) != 0) {
      throw std::invalid_argument("bad rational literal: " + text);
    }
    return Rat(n, d);
  }
  auto dot = text.find('.');
  if (dot != std::string::npos) {
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    size_t frac_len = text.size() - dot - 1;
    if (digits.empty() || digits == "-" || digits == "+")
      throw std::invalid_argument("bad rational literal: " + text);
    mpz_class n;
    if (n.set_str(digits, 10) != 0)
      throw std::invalid_argument("bad rational literal: " + text);
    mpz_class d;
    mpz_ui_pow_ui(d.get_mpz_t(), 10, frac_len);
    return Rat(n, d);
  }
  mpz_class n;
  if (n.set_str(text, 10) != 0)
    throw std::invalid_argument("bad rational literal: " + text);
  return Rat(n);
}

Rat& Rat::operator/=(const Rat& o) {
  if (o.is_zero()) throw std::domain_error("rational division by zero");
  v_ /= o.v_;
  return *this;
}

Rat Rat::abs() const {
  Rat r = *this;
  if (r.sign() < 0) return -r;
  return r;
}

mpz_class Rat::floor() const {
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), v_.get_num().get_mpz_t(), v_.get_den().get_mpz_t());
  return q;
}

std::string Rat::str() const {
  if (v_.get_den() == 1) return v_.get_num().get_str();
  return v_.get_num().get_str() + "/" + v_.get_den().get_str();
}

std::ostream& operator<<(std::ostream& os, const Rat& r) {
  return os << r.str();
}

}  // namespace fracvis
