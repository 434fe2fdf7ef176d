#ifndef CRDDME_ERRORS_HPP
#define CRDDME_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace crddme {

/// Invalid or inconsistent configuration. `path` locates the offending field
/// (e.g. "species[1].diffusivity") when known.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string &what, std::string path = {})
      : std::runtime_error(path.empty() ? what : path + ": " + what),
        path_(std::move(path)) {}
  const std::string &path() const { return path_; }

private:
  std::string path_;
};

/// Non-finite values, singular systems, failed convergence, negative rates.
class NumericsError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace crddme

#endif
