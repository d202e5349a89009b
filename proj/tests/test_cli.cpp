#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "faithful/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "faithful_cli_test";

struct Run {
  int code = -1;
  std::string out;
};

Run lab(const std::string& args) {
  fs::create_directories(kDir);
  const auto log = (kDir / "stdout.txt").string();
  std::string cmd = std::string(FAITHFUL_LAB_PATH) + " " + args + " > " + log + " 2>&1";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = faithful::io::read_text_file(log);
  return r;
}

std::string data(const std::string& name) { return std::string(FAITHFUL_DATA_DIR) + "/" + name; }
std::string tmp(const std::string& name) { return (kDir / name).string(); }

void write(const std::string& name, const std::string& text) {
  fs::create_directories(kDir);
  faithful::io::write_text_file(tmp(name), text);
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(lab("").code, 1);
  EXPECT_EQ(lab("bogus").code, 1);
  EXPECT_EQ(lab("check --model " + data("m1.json") + " --k 0.1 --nope").code, 1);
  EXPECT_EQ(lab("--help").code, 0);
}

TEST(Cli, CheckContract) {
  auto pass = lab("check --model " + data("m1.json") + " --k 0.1");
  EXPECT_EQ(pass.code, 0) << pass.out;
  EXPECT_NE(pass.out.find("pass"), std::string::npos);
  EXPECT_NE(pass.out.find("k = 0.1"), std::string::npos);

  auto collider = lab("check --model " + data("collider_0.6.json") + " --k 0.1");
  EXPECT_EQ(collider.code, 1);
  EXPECT_NE(collider.out.find("'D'"), std::string::npos);

  EXPECT_EQ(lab("check --model " + data("edgeless.json") + " --lambda 0.5").code, 0);

  auto fail = lab("check --model " + data("m1.json") + " --lambda 0.2");
  EXPECT_EQ(fail.code, 1);
  EXPECT_NE(fail.out.find("violation"), std::string::npos);

  EXPECT_EQ(lab("check --model " + data("m1.json")).code, 1);
  EXPECT_EQ(lab("check --model " + data("m1.json") + " --k 0.1 --lambda 0.2").code, 1);
  EXPECT_EQ(lab("check --model " + data("m1.json") + " --k 1.5").code, 1);
}

TEST(Cli, AdversaryContract) {
  auto ok = lab("adversary --theta0 0.5 --k 0.1 --epsilon 1e-4 --out " + tmp("cert.json") + " --samples 100");
  ASSERT_EQ(ok.code, 0) << ok.out;
  auto cert = faithful::io::read_json_file(tmp("cert.json"));
  EXPECT_LT(cert["kl"].get<double>(), 1e-4);
  EXPECT_TRUE(fs::exists(tmp("cert_P1.csv")));
  EXPECT_TRUE(fs::exists(tmp("cert_P2.csv")));
  EXPECT_EQ(faithful::io::read_csv(tmp("cert_P1.csv")).rows(), 100u);

  EXPECT_EQ(lab("adversary --theta0 0 --k 0.1 --epsilon 1e-4 --out " + tmp("c0.json")).code, 1);
  auto failed = lab("adversary --theta0 0.5 --k 0.1 --epsilon 1e-30 --out " + tmp("c1.json"));
  EXPECT_EQ(failed.code, 2);
  EXPECT_NE(failed.out.find("last scale"), std::string::npos);
}

TEST(Cli, DiscoverContract) {
  auto d = faithful::sample(faithful::make_m1(0.5, 0.5, 0.3), 5000, 1);
  faithful::io::write_csv(d, tmp("m1.csv"));
  auto r = lab("discover --data " + tmp("m1.csv") + " --lambda 0.2 --effect X3,X4 --level 0.95 --out " +
               tmp("d.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = faithful::io::read_json_file(tmp("d.json"));
  EXPECT_EQ(j["result"]["outcome"], "structure");
  EXPECT_EQ(j["estimate"]["kind"], "singleton");
  EXPECT_NEAR(j["estimate"]["value"].get<double>(), 0.3, 0.05);
  EXPECT_TRUE(j["region"]["s2"].empty());

  auto weak = faithful::sample(faithful::make_m1(0.05, 0.5, 0.3), 5000, 2);
  faithful::io::write_csv(weak, tmp("weak.csv"));
  r = lab("discover --data " + tmp("weak.csv") + " --lambda 0.04 --gate 0.2 --out " + tmp("w.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(faithful::io::read_json_file(tmp("w.json"))["result"]["outcome"], "no_conclusion");

  auto missing = lab("discover --data /no/file.csv --lambda 0.2 --out " + tmp("x.json"));
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.out.find("/no/file.csv"), std::string::npos);

  write("bad.csv", "X1,X2\n1,2\n3,oops\n");
  auto bad = lab("discover --data " + tmp("bad.csv") + " --lambda 0.2 --out " + tmp("x.json"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("line 3"), std::string::npos);

  EXPECT_EQ(lab("discover --data " + tmp("m1.csv") + " --lambda 0 --out " + tmp("x.json")).code, 1);
  EXPECT_EQ(lab("discover --data " + tmp("m1.csv") + " --lambda 0.2 --effect X3 --out " + tmp("x.json")).code, 1);
}

TEST(Cli, SimulateContract) {
  auto r = lab("simulate --config " + data("pointwise.json") + " --out " + tmp("p.csv") + " --format csv");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(faithful::io::read_text_file(tmp("p.csv")).rfind("model_id,n,metric,value,stderr\n", 0), 0u);
  EXPECT_NE(r.out.find("excluded cancel"), std::string::npos);

  write("broken.json", "{\n  \"demo\": \"pointwise\",\n  oops\n}");
  auto broken = lab("simulate --config " + tmp("broken.json") + " --out " + tmp("x.json"));
  EXPECT_EQ(broken.code, 1);
  EXPECT_NE(broken.out.find("line 3"), std::string::npos);

  write("invalid.json", R"({"demo": "pointwise", "family": {"kind": "grid", "models": []}, "sample_sizes": [100]})");
  auto invalid = lab("simulate --config " + tmp("invalid.json") + " --out " + tmp("x.json"));
  EXPECT_EQ(invalid.code, 1);
  EXPECT_NE(invalid.out.find("family.models"), std::string::npos);

  EXPECT_EQ(lab("simulate --config " + data("pointwise.json") + " --out " + tmp("p.x") + " --format xml").code, 1);
}

TEST(Cli, SeedOverrideChangesReport) {
  ASSERT_EQ(lab("simulate --config " + data("pointwise.json") + " --out " + tmp("s1.json") + " --seed 1").code, 0);
  ASSERT_EQ(lab("simulate --config " + data("pointwise.json") + " --out " + tmp("s2.json") + " --seed 2").code, 0);
  auto a = faithful::io::read_json_file(tmp("s1.json")), b = faithful::io::read_json_file(tmp("s2.json"));
  EXPECT_EQ(a["seed"], 1);
  EXPECT_EQ(b["seed"], 2);
}
