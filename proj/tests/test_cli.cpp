#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "inrv/dataio.hpp"
#include "inrv/errors.hpp"
#include "inrv/run_config.hpp"

using namespace inrv;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "inrv_cli_test";
  fs::create_directories(dir);
  return dir;
}

// Runs the command-line tool, returning its exit status; output goes to `log`.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(INRV_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config defaults and hashing") {
  RunConfig c;
  CHECK(c.get("profile") == "test");
  CHECK(c.hash().size() == 16);
  CHECK(c.hash() == RunConfig().hash());
  const std::string before = c.hash();
  c.set("lr", "2e-4");
  CHECK(c.hash() != before);
  CHECK(c.resolved().find("lr = 2e-4\n") != std::string::npos);

  const TrainConfig t = RunConfig().train();
  CHECK(t.lr == 1e-4);
  CHECK(t.threshold == 1e-3);
  CHECK(t.kl_weight == 1.0);
  CHECK(t.pixel_batch == 1024);
  CHECK(t.model == ModelConfig::test());
  CHECK(t.config_hash == RunConfig().hash());
  CHECK(RunConfig().inversion().lr == 1e-2);
  CHECK(RunConfig().inversion().steps == 500);
  CHECK(RunConfig().single_inr().steps == 750);
}

TEST_CASE("config parsing") {
  RunConfig c;
  c.parse("# header\n  max_epochs = 100, 150 ,300  # caps\n\nregularization=gaussian+semantic\nprofile = paper\n");
  const TrainConfig t = c.train();
  CHECK(t.max_epochs == std::vector<std::size_t>{100, 150, 300});
  CHECK(t.regularization == Regularization::GaussianSemantic);
  CHECK(t.model == ModelConfig::paper());

  c.parse("profile = custom\nfield_hidden = 32\nbands = 2\n");
  const ModelConfig m = c.model();
  CHECK(m.field.hidden_width == 32);
  CHECK(m.field.num_bands == 2);
  CHECK(m.head_hidden == ModelConfig::test().head_hidden);

  CHECK_THROWS_WITH_AS(c.parse("lr = 1\nmax_epoch = 3\n", "run.cfg"), "run.cfg:2: unknown config key 'max_epoch'",
                       UsageError);
  CHECK_THROWS_WITH_AS(c.parse("just words\n", "run.cfg"), "run.cfg:1: expected 'key = value', got 'just words'",
                       UsageError);

  RunConfig bad;
  bad.set("pixel_batch", "-3");
  CHECK_THROWS_AS(bad.train(), UsageError);
  bad = RunConfig();
  bad.set("regularization", "l2");
  CHECK_THROWS_AS(bad.train(), UsageError);
  bad = RunConfig();
  bad.set("lr", "fast");
  CHECK_THROWS_AS(bad.train(), UsageError);
  bad = RunConfig();
  bad.set("profile", "huge");
  CHECK_THROWS_AS(bad.model(), UsageError);
  CHECK_THROWS_AS(RunConfig().set("nope", "1"), UsageError);
}

TEST_CASE("config files") {
  const fs::path p = work_dir() / "run.cfg";
  std::ofstream(p) << "seed = 9\nvideo_batch = 4\n";
  const RunConfig c = RunConfig::from_file(p);
  CHECK(c.seed() == 9);
  CHECK(c.train().video_batch == 4);
  CHECK_THROWS_WITH_AS(RunConfig::from_file(work_dir() / "missing.cfg"),
                       doctest::Contains("missing.cfg"), UsageError);
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = work_dir();
  const fs::path log = dir / "log.txt";
  const std::string data = (dir / "data").string();
  fs::remove_all(data);

  CHECK(run_cli("gen-data --out " + data + " --count 2 --height 16 --frames 3 --seed 1", log) == 0);
  CHECK(fs::exists(fs::path(data) / "video_00001.rvid"));
  CHECK(slurp(log).find("# config_hash = ") != std::string::npos);

  CHECK(run_cli("train --config " + (dir / "missing.cfg").string() + " --data " + data, log) == 1);
  CHECK(slurp(log).find("missing.cfg") != std::string::npos);
  CHECK(run_cli("train --data " + data + " --bogus 3", log) == 1);
  CHECK(slurp(log).find("--bogus") != std::string::npos);
  CHECK(run_cli("frobnicate", log) == 1);

  std::ofstream(dir / "bad.cfg") << "max_epoch = 2\n";
  CHECK(run_cli("--config " + (dir / "bad.cfg").string() + " train --data " + data + " --out x", log) == 1);
  CHECK(slurp(log).find("max_epoch") != std::string::npos);

  std::ofstream(dir / "junk.rvid") << "not a video";
  CHECK(run_cli("fit-single --video " + (dir / "junk.rvid").string(), log) == 2);
  CHECK(run_cli("reconstruct --ckpt " + (dir / "none.inrv").string() + " --index 0 --out x.rvid", log) == 2);

  std::ofstream(dir / "wild.cfg") << "single_lr = 1e200\nsingle_steps = 3\n";
  CHECK(run_cli("--config " + (dir / "wild.cfg").string() + " fit-single --video " + data + "/video_00000.rvid", log) ==
        3);

  std::ofstream(dir / "tiny.cfg") << "max_epochs = 1\npixel_batch = 256\n";
  const std::string run = (dir / "run").string();
  fs::remove_all(run);
  REQUIRE(run_cli("--config " + (dir / "tiny.cfg").string() + " train --data " + data + " --out " + run, log) == 0);
  CHECK(fs::exists(fs::path(run) / "stage_1.inrv"));
  CHECK(fs::exists(fs::path(run) / "stage_2.inrv"));
  CHECK(fs::exists(fs::path(run) / "final.inrv"));
  const Model m = read_checkpoint(fs::path(run) / "final.inrv");
  CHECK(m.meta.config_hash == RunConfig::from_file(dir / "tiny.cfg").hash());

  CHECK(run_cli("invert --ckpt " + run + "/final.inrv --video " + data +
                    "/heldout_00000.rvid --mask sparse --mask-param 0.25 --steps 2",
                log) == 0);
  CHECK(slurp(log).find("mask=sparse S=192 of 768") != std::string::npos);
  CHECK(run_cli("invert --ckpt " + run + "/final.inrv --video " + data + "/heldout_00000.rvid --mask half", log) == 1);
  CHECK(run_cli("export-latents --ckpt " + run + "/final.inrv --out " + (dir / "codes.csv").string(), log) == 0);
}
