#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aliascope::cli {

inline constexpr const char* kToolVersion = "aliascope 1.0.0";

/// Bad flag values or combinations; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenOptions {
  std::uint32_t n_freqs = 20;
  std::uint32_t size = 32;
  std::uint32_t count = 0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct TrainOptions {
  std::string arch = "resnet-c";
  std::size_t width = 16;
  std::optional<std::size_t> hidden;
  std::size_t depth = 3;
  std::size_t stem_stride = 1;
  bool stem_pool = false;
  std::optional<std::size_t> n_classes;
  std::filesystem::path data;
  std::optional<std::filesystem::path> test;
  std::filesystem::path out;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::size_t lr_drop_epoch = 35;
  double lr_drop_factor = 10.0;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool quiet = false;
};

struct AnalyzeOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  double divisor = 10.0;
  std::optional<std::size_t> limit;
  std::filesystem::path out;
};

struct AttackOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::vector<double> eps;
  std::size_t steps = 100;
  std::optional<double> step_size;
  double divisor = 10.0;
  std::optional<std::size_t> limit;
  std::vector<double> clip;  // empty or {lo, hi}
  bool random_start = false;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct SweepArchOptions {
  std::filesystem::path train;
  std::filesystem::path test;
  std::vector<std::string> families;
  std::vector<std::size_t> widths{8, 16, 32};   // resnet-c / resnet-w
  std::size_t depth = 3;                        // fixed depth for resnet-c / resnet-w
  std::vector<std::size_t> depths{1, 2, 3, 4};  // resnet-d
  std::size_t width = 16;                       // fixed width for resnet-d
  std::vector<std::size_t> hiddens{32, 128, 512};  // fc-1h / fc-2h
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::size_t lr_drop_epoch = 35;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  bool quiet = false;
};

void cmd_gen(const GenOptions& o);
void cmd_train(const TrainOptions& o);
void cmd_analyze(const AnalyzeOptions& o);
void cmd_attack(const AttackOptions& o);
void cmd_sweep_arch(const SweepArchOptions& o);

/// Parses argv and dispatches. Returns 0 on success, 2 on usage errors,
/// 1 on runtime failures; diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace aliascope::cli
