#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <specsim/config.hpp>
#include <specsim/errors.hpp>
#include <specsim/presets.hpp>

using namespace specsim;

namespace {

const char* kMinimalConfig = R"(# smoke config
name = "smoke"

[workload]
num_requests = 4
window = 3
seed = 9
bonus_token = true

[[workload.class]]
name = "only"
weight = 1.0
prompt_len = [10, 20]
target_len = [40, 50]
accept = [[0.5, 0.7], [0.2, 0.4]]

[[ssm]]
tokens_per_sec = 800.0
batch_capacity = 4
batch_slowdown = 0.1

[[ssm]]
tokens_per_sec = 300.0
batch_capacity = 2
batch_slowdown = 0.05

[llm]
fixed_overhead_sec = 0.01
per_token_sec = 0.0001

[bandit]
alpha = 4
beta = 2
lambda = 1.0
max_slots = 40

[experiment]
policy = "lbss"
repetitions = 2
)";

}  // namespace

TEST_CASE("a minimal config parses into the expected values") {
  const ExperimentConfig config = parse_config(kMinimalConfig);
  CHECK(config.name == "smoke");
  CHECK(config.workload.num_requests == 4);
  CHECK(config.workload.window == 3);
  CHECK(config.workload.seed == 9);
  CHECK(config.workload.bonus_token);
  REQUIRE(config.workload.ssm_profiles.size() == 2);
  CHECK(config.workload.ssm_profiles[0].tokens_per_sec == 800.0);
  CHECK(config.workload.ssm_profiles[1].batch_capacity == 2);
  REQUIRE(config.workload.difficulty_mix.size() == 1);
  const DifficultyClass& cls = config.workload.difficulty_mix[0];
  CHECK(cls.prompt_len_lo == 10);
  CHECK(cls.target_len_hi == 50);
  REQUIRE(cls.accept_range.size() == 2);
  CHECK(cls.accept_range[1].first == 0.2);
  CHECK(config.bandit.alpha == 4);
  CHECK(config.bandit.max_slots == 40);
  CHECK(config.repetitions == 2);
  CHECK(config.policy == PolicyKind::Lbss);
  CHECK(config.pipeline.mode == PipelineMode::Serial);  // default
}

TEST_CASE("presets round-trip through their text form") {
  for (const std::string& name : presets::names()) {
    const ExperimentConfig preset = presets::by_name(name);
    const std::string text = config_toml(preset);
    const ExperimentConfig reparsed = parse_config(text);
    CHECK(config_toml(reparsed) == text);
  }
}

TEST_CASE("unknown keys are rejected") {
  std::string text = kMinimalConfig;
  text += "\n[packer]\ndecompositon = true\n";  // typo
  CHECK_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("unknown sections are rejected") {
  std::string text = kMinimalConfig;
  text += "\n[plotting]\nenabled = true\n";
  CHECK_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("duplicate keys are rejected") {
  std::string text = kMinimalConfig;
  text += "\n[packer]\nwidth = 1\nwidth = 2\n";
  CHECK_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("missing required sections fail") {
  CHECK_THROWS_AS(parse_config("name = \"x\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[workload]\nnum_requests = 1\n"), ConfigError);
}

TEST_CASE("invalid enum values fail") {
  std::string text = kMinimalConfig;
  text += "\n[pipeline]\nmode = \"warp\"\n";
  CHECK_THROWS_AS(parse_config(text), ConfigError);

  std::string policy = kMinimalConfig;
  policy.replace(policy.find("\"lbss\""), 6, "\"ucb\"");
  CHECK_THROWS_AS(parse_config(policy), ConfigError);
}

TEST_CASE("semantic validation runs on parse") {
  std::string text = kMinimalConfig;
  // beta does not divide alpha
  text.replace(text.find("beta = 2"), 8, "beta = 3");
  CHECK_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("syntax errors carry line information") {
  try {
    parse_config("[workload\nnum_requests = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("missing config files raise ConfigError") {
  CHECK_THROWS_AS(load_config("/nonexistent/specsim.toml"), ConfigError);
}
