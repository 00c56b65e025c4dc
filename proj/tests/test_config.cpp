#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "patchsel/error.hpp"
#include "patchsel/training/config.hpp"

using namespace patchsel;
using namespace patchsel::training;

TEST_CASE("defaults") {
  const TrainRun r;
  CHECK(r.mode == TrainMode::kPatchNet);
  CHECK(r.objective == Objective::kMax);
  CHECK(r.detach_input);
  CHECK(r.epochs == 30);
  CHECK(r.batch_size == 16);
  CHECK(r.base_lr == 2.5e-4);
  CHECK(r.sigma_max == 16.0);
  CHECK(r.patch_size == 64);
  CHECK(r.temperature == 2.0);
  CHECK(r.restore.channels == 32);
  CHECK(r.restore.depth == 4);
  CHECK(r.hnm_threshold == 40.0);
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("text round trip") {
  TrainRun r;
  r.mode = TrainMode::kHnm;
  r.hnm_schedule = true;
  r.epochs = 7;
  r.base_lr = 1.0 / 3.0;
  r.seed = 18446744073709551615ULL;
  r.oversample = {20, 1};
  r.bayer = "GBRG";
  r.restore.channels = 16;
  r.restore.sigma_conditioning = false;
  r.init_checkpoint = "/tmp/x y.pfck";
  const auto text = r.to_text();
  const auto back = TrainRun::parse(text);
  CHECK(back.to_text() == text);
  CHECK(back.base_lr == r.base_lr);
  CHECK(back.seed == r.seed);
  CHECK(back.oversample == r.oversample);
  CHECK(back.restore.sigma_conditioning == false);
  CHECK(back.init_checkpoint == r.init_checkpoint);
}

TEST_CASE("parse accepts comments and overrides") {
  const auto r = TrainRun::parse("# desk run\nmode = uniform\n\nepochs=3   # short\nepochs = 5\n");
  CHECK(r.mode == TrainMode::kUniform);
  CHECK(r.epochs == 5);
}

TEST_CASE("parse rejects bad input") {
  CHECK_THROWS_AS(TrainRun::parse("learning_rate = 0.1"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("epochs"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("epochs = ten"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("mode = random"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("objective = maybe"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("batch_size = 0"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("temperature = 0"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("patch_size = 48"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("sigma_min = 5\nsigma_max = 2"), ConfigError);
  CHECK_THROWS_AS(TrainRun::parse("bayer = RGBG"), ConfigError);
  // schedule only where a threshold is used
  CHECK_THROWS_AS(TrainRun::parse("mode = uniform\nhnm_schedule = true"), ConfigError);
  CHECK_NOTHROW(TrainRun::parse("mode = hnm\nhnm_schedule = true"));
  CHECK_NOTHROW(TrainRun::parse("mode = patchnet\nobjective = regress\nhnm_schedule = true"));
  try {
    TrainRun::parse("epochs = 3\nlearning_rate = 0.1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
}

TEST_CASE("load from file") {
  const auto path = std::filesystem::temp_directory_path() / "patchsel_test_run.cfg";
  {
    std::ofstream f(path);
    f << "mode = hnm\nhnm_threshold = 38.5\n";
  }
  const auto r = TrainRun::load(path.string());
  CHECK(r.mode == TrainMode::kHnm);
  CHECK(r.hnm_threshold == 38.5);
  CHECK_THROWS_AS(TrainRun::load("/nonexistent/run.cfg"), IoError);
}
