#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "modviz/cli/commands.hpp"
#include "modviz/common/binary_io.hpp"
#include "modviz/common/parallel.hpp"
#include "support.hpp"

using namespace modviz;
using namespace modviz::cli;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = main_entry(args, out, err);
  r.out = out.str();
  r.err = err.str();
  set_strict_deterministic(false);
  return r;
}

bool same_bytes(const std::string& a, const std::string& b) { return read_file_bytes(a) == read_file_bytes(b); }

// Small end-to-end fixture shared by the cases below.
struct Pipeline {
  testing::TempDir dir{"cli"};
  std::string data = dir.file("d.rmlb"), lenet = dir.file("lenet.mwts"), lstm = dir.file("lstm.mwts");

  Pipeline() {
    REQUIRE(run({"--seed", "4", "generate", "--out", data, "--schemes", "BPSK,QPSK", "--count", "10", "--snr-min", "10",
                 "--snr-max", "12", "--n-x", "32"})
                .code == 0);
    REQUIRE(run({"--seed", "4", "train", "--model", "lenet", "--data", data, "--out", lenet, "--epochs", "1"}).code == 0);
    REQUIRE(run({"--seed", "4", "train", "--model", "lstm", "--format", "ap", "--data", data, "--out", lstm, "--epochs",
                 "1", "--set", "lstm.hidden=4"})
                .code == 0);
  }
};

}  // namespace

TEST_CASE("exit codes for each failure class") {
  CHECK(exit_code_for(InvalidArgument("x")) == kExitUsage);
  CHECK(exit_code_for(UsageError("x")) == kExitUsage);
  CHECK(exit_code_for(IoError("x")) == kExitIo);
  CHECK(exit_code_for(FormatError(FormatError::Kind::BadMagic, "x")) == kExitIo);
  CHECK(exit_code_for(DivergenceError("x")) == kExitDivergence);
  CHECK(exit_code_for(MismatchError("x")) == kExitMismatch);
  CHECK(exit_code_for(NoTapPoint()) == kExitMismatch);
  CHECK(run_manifest_path("a/b.svg") == "a/b.svg.run.txt");
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"generate", "--bogus", "1"}).code == kExitUsage);
  testing::TempDir dir("cli-usage");
  CHECK(run({"generate", "--out", dir.file("x.rmlb"), "--count", "-3"}).code == kExitUsage);
  CHECK(run({"generate", "--out", dir.file("x.rmlb"), "--schemes", "QAM1024"}).code == kExitUsage);
}

TEST_CASE("generate, train, eval, explain, render and replay") {
  Pipeline p;
  const auto& d = p.dir;
  CHECK(std::filesystem::exists(run_manifest_path(p.data)));
  CHECK(std::filesystem::exists(run_manifest_path(p.lenet)));

  const auto ev = run({"eval", "--model-file", p.lenet, "--data", p.data, "--split", "test", "--report", d.file("r.txt")});
  CHECK(ev.code == 0);
  CHECK(ev.out.find("accuracy") != std::string::npos);
  CHECK(std::filesystem::exists(d.file("r.txt")));

  const auto rec = d.file("e.txt");
  CHECK(run({"explain", "--method", "gradcam", "--model-file", p.lenet, "--data", p.data, "--index", "3", "--out", rec})
            .code == 0);
  CHECK(run({"render", "--record", rec, "--out", d.file("e.svg")}).code == 0);
  CHECK(run({"render", "--record", rec, "--kind", "trace", "--axis", "ap", "--out", d.file("t.svg")}).code == 0);
  CHECK(run({"explain", "--method", "mask", "--model-file", p.lstm, "--data", p.data, "--index", "2", "--iterations",
             "20", "--out", d.file("m.txt")})
            .code == 0);
  CHECK(run({"sweep", "--param", "eta", "--values", "0.2,0.4,0.8", "--method", "gradcam", "--model-file", p.lenet,
             "--data", p.data, "--index", "1", "--out", d.file("s.svg")})
            .code == 0);
  CHECK(run({"split64", "--data", p.data, "--out", d.file("h.rmlb")}).code == 0);

  // Replaying each manifest rewrites byte-identical outputs.
  for (const auto& out : {p.data, p.lenet, rec, d.file("e.svg"), d.file("m.txt"), d.file("h.rmlb")}) {
    const auto copy = out + ".orig";
    std::filesystem::copy_file(out, copy);
    std::filesystem::remove(out);
    CAPTURE(out);
    CHECK(run({"replay", run_manifest_path(out)}).code == 0);
    CHECK(same_bytes(out, copy));
  }
}

TEST_CASE("error exits on a real pipeline") {
  Pipeline p;
  const auto& d = p.dir;
  // gradcam on an LSTM and mask on a CNN are both method/model mismatches.
  CHECK(run({"explain", "--method", "gradcam", "--model-file", p.lstm, "--data", p.data, "--index", "0", "--out",
             d.file("x.txt")})
            .code == kExitMismatch);
  CHECK(run({"explain", "--method", "mask", "--model-file", p.lenet, "--data", p.data, "--index", "0", "--out",
             d.file("x.txt")})
            .code == kExitMismatch);
  CHECK(run({"explain", "--method", "mask", "--model-file", p.lenet, "--data", p.data, "--index", "0", "--iterations",
             "5", "--allow-experimental", "--out", d.file("x.txt")})
            .code == 0);
  CHECK(run({"explain", "--method", "gradcam", "--model-file", p.lenet, "--data", p.data, "--index", "100000", "--out",
             d.file("x.txt")})
            .code == kExitUsage);
  CHECK(run({"explain", "--method", "gradcam", "--model-file", d.file("missing.mwts"), "--data", p.data, "--index", "0",
             "--out", d.file("x.txt")})
            .code == kExitIo);

  write_file_bytes(d.file("junk.mwts"), std::vector<char>{'J', 'U', 'N', 'K', 0, 0, 0, 0});
  CHECK(run({"eval", "--model-file", d.file("junk.mwts"), "--data", p.data, "--report", d.file("r.txt")}).code == kExitIo);
  CHECK(run({"train", "--model", "lenet", "--data", p.data, "--out", d.file("n.mwts"), "--epochs", "3", "--lr", "1e30"})
            .code == kExitDivergence);
  CHECK(run({"train", "--model", "vgg", "--data", p.data, "--out", d.file("v.mwts")}).code == kExitUsage);
  CHECK(run({"--seed", "4", "train", "--model", "resnet", "--data", p.data, "--out", d.file("r.mwts"), "--epochs", "1",
             "--set", "resnet.channels=4", "--set", "train.batch_size=0"})
            .code == kExitUsage);
}

TEST_CASE("strict-deterministic training twice gives identical checkpoints") {
  Pipeline p;
  const auto a = p.dir.file("a.mwts"), b = p.dir.file("b.mwts");
  for (const auto& out : {a, b})
    REQUIRE(run({"--strict-deterministic", "--seed", "9", "train", "--model", "resnet", "--data", p.data, "--out", out,
                 "--epochs", "2", "--set", "resnet.channels=4"})
                .code == 0);
  CHECK(same_bytes(a, b));
}
