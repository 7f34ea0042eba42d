#pragma once

#include <array>
#include <string>
#include <string_view>

#include "dfac/agents/agent.hpp"

namespace dfac::mixers {

enum class Method { Vdn, Qmix, Qplex, Ddn, Dmix, Dplex, DdnC51, DmixC51, DplexC51 };

enum class Factorization { Additive, Monotonic, Dueling };

inline constexpr std::array<Method, 9> kAllMethods{Method::Vdn,    Method::Qmix,    Method::Qplex,
                                                   Method::Ddn,    Method::Dmix,    Method::Dplex,
                                                   Method::DdnC51, Method::DmixC51, Method::DplexC51};

/// Parses vdn|qmix|qplex|ddn|dmix|dplex|ddn-c51|dmix-c51|dplex-c51; throws DomainError otherwise.
Method parse_method(std::string_view id);
std::string method_id(Method m);
/// Upper-case display name, e.g. "DMIX-C51".
std::string method_label(Method m);

Factorization factorization_of(Method m);
agents::HeadKind head_of(Method m);
inline bool is_distributional(Method m) { return head_of(m) != agents::HeadKind::Expected; }

}  // namespace dfac::mixers
