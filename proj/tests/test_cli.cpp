#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string(PGMEL_BIN) + " " + args;
  if (!log.empty()) {
    cmd += " >" + q(log) + " 2>&1";
  } else {
    cmd += " >/dev/null 2>&1";
  }
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("cli_test_tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

// synthesizes a small dataset once per test binary run
fs::path shared_dataset() {
  static fs::path dir = [] {
    fs::path d = fresh_dir("shared_data");
    int rc = run("synth --preset confusable --out " + q(d) +
                 " --num-entities 20 --num-clusters 5 --mentions-per-entity 4"
                 " --feature-dim 8 --seed 17");
    REQUIRE(rc == 0);
    return d;
  }();
  return dir;
}

const std::string kTinyTrain =
    " --epochs 2 --batch-size 16 --lr 0.05 --negatives 3 --candidates 8"
    " --d1 3 --d2 4 --d3 4 --dropout 0.1 --seed 5";

}  // namespace

TEST_CASE("synth is deterministic and reports the preset") {
  fs::path a = fresh_dir("synth_a");
  fs::path b = fresh_dir("synth_b");
  std::string flags = "synth --preset separable --num-entities 15 --num-clusters 15"
                      " --feature-dim 8 --seed 7 --out ";
  CHECK(run(flags + q(a)) == 0);
  CHECK(run(flags + q(b)) == 0);
  for (const char* f :
       {"manifest.json", "entities.jsonl", "entities.feat", "mentions.jsonl",
        "mentions.feat"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("invalid synth arguments exit with the usage code") {
  fs::path dir = fresh_dir("synth_bad");
  CHECK(run("synth --preset separable --num-clusters 0 --out " + q(dir)) == 2);
  CHECK(run("synth --preset nonsense --out " + q(dir)) == 2);
  CHECK(run("synth") == 2);  // --out is required
  CHECK(run("bogus-subcommand") == 2);
}

TEST_CASE("confusable preset reports clusters of at least four entities") {
  fs::path dir = fresh_dir("synth_conf");
  CHECK(run("synth --preset confusable --out " + q(dir) + " --seed 3") == 0);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  REQUIRE(manifest.contains("synthetic"));
  int entities = manifest["synthetic"]["num_entities"].get<int>();
  int clusters = manifest["synthetic"]["num_clusters"].get<int>();
  CHECK(entities / clusters >= 4);
}

TEST_CASE("mel-rn training leaves the gen_reward column empty") {
  fs::path out = fresh_dir("train_melrn");
  int rc = run("train --data " + q(shared_dataset() / "manifest.json") + " --out " +
               q(out) + " --mode mel-rn" + kTinyTrain);
  REQUIRE(rc == 0);
  auto lines = lines_of(slurp(out / "report.csv"));
  REQUIRE(lines.size() == 3);  // header + 2 epochs
  CHECK(lines[0] ==
        "epoch,disc_loss,gen_reward,top1,top5,top10,top20,seconds");
  for (size_t i = 1; i < lines.size(); ++i) {
    std::stringstream ss(lines[i]);
    std::string field;
    std::getline(ss, field, ',');  // epoch
    std::getline(ss, field, ',');  // disc_loss
    std::getline(ss, field, ',');  // gen_reward
    CHECK(field.empty());
  }
}

TEST_CASE("zero epochs writes only the initial checkpoint and an empty report") {
  fs::path out = fresh_dir("train_zero");
  int rc = run("train --data " + q(shared_dataset() / "manifest.json") + " --out " +
               q(out) + " --epochs 0" + " --d1 3 --d2 4 --d3 4 --candidates 8 --negatives 3 --seed 5");
  REQUIRE(rc == 0);
  auto lines = lines_of(slurp(out / "report.csv"));
  CHECK(lines.size() == 1);  // header only
  CHECK(fs::exists(out / "final.ckpt"));
  CHECK_FALSE(fs::exists(out / "epoch_001.ckpt"));
}

TEST_CASE("identical config and seed reproduce the training trajectory") {
  fs::path a = fresh_dir("train_det_a");
  fs::path b = fresh_dir("train_det_b");
  std::string flags = "train --data " + q(shared_dataset() / "manifest.json") +
                      " --mode pgmel" + kTinyTrain + " --out ";
  REQUIRE(run(flags + q(a)) == 0);
  REQUIRE(run(flags + q(b)) == 0);

  // all columns except wallclock must match; checkpoints are byte-exact
  auto strip_seconds = [](const std::string& csv) {
    std::string out;
    for (const std::string& line : lines_of(csv)) {
      out += line.substr(0, line.rfind(',')) + "\n";
    }
    return out;
  };
  CHECK(strip_seconds(slurp(a / "report.csv")) == strip_seconds(slurp(b / "report.csv")));
  CHECK(slurp(a / "final.ckpt") == slurp(b / "final.ckpt"));
  CHECK(slurp(a / "epoch_001.ckpt") == slurp(b / "epoch_001.ckpt"));
}

TEST_CASE("data load failures exit with the runtime code") {
  fs::path out = fresh_dir("train_baddata");
  CHECK(run("train --data /no/such/manifest.json --out " + q(out)) == 1);
}

TEST_CASE("eval validates the split name and is reproducible") {
  fs::path out = fresh_dir("eval_run");
  std::string data = q(shared_dataset() / "manifest.json");
  REQUIRE(run("train --data " + data + " --out " + q(out) + " --mode mel-rn" +
              kTinyTrain) == 0);
  std::string ckpt = q(out / "final.ckpt");

  CHECK(run("eval --checkpoint " + ckpt + " --data " + data + " --split nonsense") == 2);

  fs::path csv1 = out / "eval1.csv";
  fs::path csv2 = out / "eval2.csv";
  fs::path per = out / "per_mention.csv";
  CHECK(run("eval --checkpoint " + ckpt + " --data " + data +
            " --split validation --out " + q(csv1) + " --per-mention " + q(per)) == 0);
  CHECK(run("eval --checkpoint " + ckpt + " --data " + data + " --split validation --out " +
            q(csv2)) == 0);
  CHECK(slurp(csv1) == slurp(csv2));

  auto per_lines = lines_of(slurp(per));
  CHECK(per_lines[0] == "mention_id,gold_rank,top1_id,top1_phi");
  CHECK(per_lines.size() >= 2);

  // train and validation splits must disagree only in the mention set
  fs::path csv3 = out / "eval3.csv";
  CHECK(run("eval --checkpoint " + ckpt + " --data " + data + " --split test --out " +
            q(csv3)) == 0);
  CHECK(lines_of(slurp(csv3))[0] == "split,k,accuracy");
}

TEST_CASE("gradcheck passes and reports per-op errors") {
  fs::path log = fresh_dir("gradcheck") / "out.txt";
  CHECK(run("gradcheck --seed 3 --cases 2", log) == 0);
  std::string text = slurp(log);
  for (const char* op : {"matmul", "conv1d", "softmax", "cos_sim", "composed_phi"}) {
    CHECK(text.find(op) != std::string::npos);
  }
  CHECK(text.find("pass") != std::string::npos);
}

TEST_CASE("ablate emits one row per variant even on tiny budgets") {
  fs::path out = fresh_dir("ablate");
  int rc = run("ablate --data " + q(shared_dataset() / "manifest.json") + " --out " +
               q(out) + " --seeds 1,2 --epochs 1 --batch-size 16 --negatives 3"
               " --candidates 8");
  REQUIRE(rc == 0);
  auto lines = lines_of(slurp(out / "ablation.csv"));
  REQUIRE(lines.size() == 8);  // header + 7 variants
  CHECK(lines[0].rfind("variant,seeds", 0) == 0);
  for (const char* v : {"pgmel", "mel-rn", "text-only", "entity-text-only",
                        "no-gated-fusion", "cnn-k1", "cnn-k12"}) {
    bool found = false;
    for (const auto& l : lines) found = found || l.rfind(std::string(v) + ",", 0) == 0;
    CHECK_MESSAGE(found, v);
  }
}

TEST_CASE("training on the separable preset reaches high train accuracy") {
  fs::path data = fresh_dir("sep_data");
  REQUIRE(run("synth --preset separable --out " + q(data) +
              " --num-entities 60 --num-clusters 60 --mentions-per-entity 5"
              " --feature-dim 16 --sigma 0.3 --seed 9") == 0);
  fs::path out = fresh_dir("sep_run");
  REQUIRE(run("train --data " + q(data / "manifest.json") + " --out " + q(out) +
              " --mode mel-rn --epochs 12 --batch-size 32 --lr 0.08 --negatives 3"
              " --candidates 8 --d1 4 --d2 8 --d3 8 --dropout 0.1 --seed 2") == 0);
  fs::path csv = out / "eval_train.csv";
  REQUIRE(run("eval --checkpoint " + q(out / "final.ckpt") + " --data " +
              q(data / "manifest.json") + " --split train --out " + q(csv)) == 0);
  auto lines = lines_of(slurp(csv));
  // split,k,accuracy with k ascending; top-1 is the first data row
  REQUIRE(lines.size() >= 2);
  std::stringstream ss(lines[1]);
  std::string split, k, acc;
  std::getline(ss, split, ',');
  std::getline(ss, k, ',');
  std::getline(ss, acc, ',');
  CHECK(k == "1");
  CHECK(std::stod(acc) >= 0.98);
}
