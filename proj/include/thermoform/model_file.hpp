#pragma once

#include <stdexcept>
#include <string>

#include "thermoform/pfaffian.hpp"

// Loader for the text model-file format: INI-style sections with key =
// value lines, expressions as quoted strings.  Documented in the README;
// the bundled files under models/ are the reference examples.

namespace thermoform {

// Parse or validation failure; the message starts with "path:line:" for
// syntax problems and "path:" for semantic ones.
class ModelFileError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct LoadedModel {
    ThermoModel model;
    std::string digest;  // fnv1a64 of the raw file bytes, 16 hex digits
    std::string path;
};

LoadedModel load_model_file(const std::string& path);

// The same parser over in-memory text; `origin` labels diagnostics.
LoadedModel parse_model_text(const std::string& text, const std::string& origin);

// FNV-1a (64-bit) over a byte string, as printed in reports.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace thermoform
