#include "dfac/mixers/method.hpp"

#include <cctype>

#include "dfac/error.hpp"

namespace dfac::mixers {

Method parse_method(std::string_view id) {
  for (Method m : kAllMethods)
    if (method_id(m) == id) return m;
  throw DomainError("unknown method '" + std::string(id) +
                    "' (expected vdn|qmix|qplex|ddn|dmix|dplex|ddn-c51|dmix-c51|dplex-c51)");
}

std::string method_id(Method m) {
  switch (m) {
    case Method::Vdn: return "vdn";
    case Method::Qmix: return "qmix";
    case Method::Qplex: return "qplex";
    case Method::Ddn: return "ddn";
    case Method::Dmix: return "dmix";
    case Method::Dplex: return "dplex";
    case Method::DdnC51: return "ddn-c51";
    case Method::DmixC51: return "dmix-c51";
    case Method::DplexC51: return "dplex-c51";
  }
  return "?";
}

std::string method_label(Method m) {
  std::string s = method_id(m);
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

Factorization factorization_of(Method m) {
  switch (m) {
    case Method::Vdn:
    case Method::Ddn:
    case Method::DdnC51: return Factorization::Additive;
    case Method::Qmix:
    case Method::Dmix:
    case Method::DmixC51: return Factorization::Monotonic;
    default: return Factorization::Dueling;
  }
}

agents::HeadKind head_of(Method m) {
  switch (m) {
    case Method::Vdn:
    case Method::Qmix:
    case Method::Qplex: return agents::HeadKind::Expected;
    case Method::Ddn:
    case Method::Dmix:
    case Method::Dplex: return agents::HeadKind::Quantile;
    default: return agents::HeadKind::Categorical;
  }
}

}  // namespace dfac::mixers
