#include "qkdrelay/ids.hpp"

#include <algorithm>
#include <cctype>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error([&] {
        std::string msg = "validation failed";
        for (const auto& v : violations) msg += "; " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

std::string node_label(std::string_view node) {
  if (node.size() > 1 && node.front() == 'N' &&
      std::all_of(node.begin() + 1, node.end(),
                  [](unsigned char c) { return std::isdigit(c) != 0; })) {
    return std::string(node.substr(1));
  }
  return std::string(node);
}

std::string KmsId::name() const { return "KMS_" + node_label(node) + link; }

std::string vkms_name(std::string_view node) { return "vKMS_" + node_label(node); }

}  // namespace qkdrelay
