#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hicomp/hicomp.hpp"

using namespace hicomp;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hicomp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_text(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

// Values on the 1/255 grid so PNG round trips are exact.
Image grid_image(std::mt19937_64& rng, int h, int w, int c) {
  Image img(h, w, c);
  for (auto& v : img.data()) v = float(int(rng() % 256) / 255.0);
  return img;
}

std::vector<std::uint8_t> file_bytes(const std::string& p) { return read_file(p); }

}  // namespace

TEST_F(CliTest, ComposeSingleForegroundIsAlphaComposite) {
  std::mt19937_64 rng(51);
  const auto bg = grid_image(rng, 6, 5, 3), fg = grid_image(rng, 6, 5, 3);
  MaskMap m(6, 5);
  for (auto& v : m.data()) v = float(int(rng() % 256) / 255.0);
  save_image(path("bg.png"), bg);
  save_image(path("fg.png"), fg);
  save_mask(path("m.png"), m);
  write_text("scene.json", R"({"version":1,"background":"bg.png",
    "foregrounds":[{"image":"fg.png","mask":"m.png","warp":{"type":"affine","m":[1,0,0,0,1,0]}}],
    "hierarchy":{"weights":[1]}})");
  ASSERT_EQ(run({"compose", "--scene", path("scene.json"), "--out", path("out.png")}), 0) << err_.str();
  const auto got = load_image(path("out.png"));
  Image want(6, 5, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) {
        const double a = m.at(y, x);
        want.at(y, x, c) = float(detail::quantize(a * fg.at(y, x, c) + (1 - a) * bg.at(y, x, c)) / 255.0);
      }
  EXPECT_EQ(got, want);
}

TEST_F(CliTest, EmitMaskOnDisjointSceneIsSumOfMasks) {
  std::mt19937_64 rng(52);
  save_image(path("bg.png"), grid_image(rng, 4, 4, 3));
  save_image(path("a.png"), grid_image(rng, 4, 4, 3));
  save_image(path("b.png"), grid_image(rng, 4, 4, 3));
  const MaskMap ma(4, 4, std::vector<float>{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const MaskMap mb(4, 4, std::vector<float>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1});
  save_mask(path("ma.png"), ma);
  save_mask(path("mb.png"), mb);
  write_text("scene.json", R"({"version":1,"background":"bg.png",
    "foregrounds":[{"image":"a.png","mask":"ma.png"},{"image":"b.png","mask":"mb.png"}],
    "hierarchy":{"logits":[0.3,-0.2]}})");
  ASSERT_EQ(run({"compose", "--scene", path("scene.json"), "--out", path("out.png"), "--emit-mask", path("mask.png")}),
            0)
      << err_.str();
  const auto mask = load_mask(path("mask.png"));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(mask.data()[i], ma.data()[i] + mb.data()[i]);
}

TEST_F(CliTest, ComposeWithFilter) {
  std::mt19937_64 rng(53);
  save_image(path("bg.png"), grid_image(rng, 8, 8, 3));
  save_image(path("fg.png"), grid_image(rng, 8, 8, 3));
  save_mask(path("m.png"), MaskMap(8, 8, 1.0f));
  save_image(path("look.png"), grid_image(rng, 8, 8, 3));
  write_text("scene.json", R"({"version":1,"background":"bg.png",
    "foregrounds":[{"image":"fg.png","mask":"m.png"}],"hierarchy":{"logits":[0]}})");
  ASSERT_EQ(run({"compose", "--scene", path("scene.json"), "--out", path("out.png"), "--filter", path("look.png"),
                 "--filter-out", path("filtered.png"), "--radius", "2", "--eps", "0.01"}),
            0)
      << err_.str();
  const auto want = guided_filter(load_image(path("out.png")), load_image(path("look.png")), FilterConfig{2, 0.01});
  const auto got = load_image(path("filtered.png"));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 0.5 / 255 + 1e-6);
}

TEST_F(CliTest, MalformedJsonNamesLocation) {
  write_text("scene.json", "{\"version\": 1,\n  \"background\": }");
  EXPECT_EQ(run({"compose", "--scene", path("scene.json"), "--out", path("out.png")}), 2);
  EXPECT_NE(err_.str().find("line 2"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("column"), std::string::npos);
}

TEST_F(CliTest, MissingSceneFileIsIoFailure) {
  EXPECT_EQ(run({"compose", "--scene", path("nope.json"), "--out", path("out.png")}), 3);
}

TEST_F(CliTest, WrongLogitCountIsInvalidInput) {
  std::mt19937_64 rng(54);
  save_image(path("bg.png"), grid_image(rng, 4, 4, 3));
  save_image(path("fg.png"), grid_image(rng, 4, 4, 3));
  save_mask(path("m.png"), MaskMap(4, 4, 1.0f));
  write_text("scene.json", R"({"version":1,"background":"bg.png",
    "foregrounds":[{"image":"fg.png","mask":"m.png"},{"image":"fg.png","mask":"m.png"},{"image":"fg.png","mask":"m.png"}],
    "hierarchy":{"logits":[0,0,0,0,0]}})");
  EXPECT_EQ(run({"compose", "--scene", path("scene.json"), "--out", path("out.png")}), 2);
  EXPECT_NE(err_.str().find("expected 6 weights, got 5"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(path("out.png")));
}

TEST_F(CliTest, UnknownDemoIsInvalidInput) {
  EXPECT_EQ(run({"demo", "teleport"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({}), 2);
}

TEST_F(CliTest, DemoGradcheckReport) {
  ASSERT_EQ(run({"demo", "gradcheck", "--seed", "1", "--m", "2", "--size", "32", "--report", path("g.json")}), 0)
      << err_.str();
  const auto bytes = file_bytes(path("g.json"));
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
  EXPECT_LT(j.at("max_relative_discrepancy").get<double>(), 1e-4);
  EXPECT_TRUE(j.at("within_tolerance").get<bool>());
}

TEST_F(CliTest, DemoHierarchyReport) {
  ASSERT_EQ(run({"demo", "hierarchy", "--seed", "7", "--m", "3", "--size", "64", "--steps", "500", "--lr", "0.5",
                 "--report", path("h.json")}),
            0)
      << err_.str();
  const auto bytes = file_bytes(path("h.json"));
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(j.at("loss_curve").size(), 500u);
  EXPECT_EQ(j.at("recovered_order_index"), j.at("gt_order_index"));
  EXPECT_NE(out_.str().find("recovered_order_index"), std::string::npos);
}

TEST_F(CliTest, DemoFilterSweepToStdout) {
  ASSERT_EQ(run({"demo", "filter-sweep", "--eps", "1e-7,1e-4,1e-2,1", "--size", "64"}), 0) << err_.str();
  const auto j = nlohmann::json::parse(out_.str());
  EXPECT_EQ(j.at("rows").size(), 4u);
  EXPECT_TRUE(j.at("monotone_non_increasing").get<bool>());
}

TEST_F(CliTest, DemoIsDeterministic) {
  ASSERT_EQ(run({"demo", "hierarchy", "--seed", "3", "--m", "2", "--size", "32", "--steps", "20"}), 0);
  const auto first = out_.str();
  ASSERT_EQ(run({"demo", "hierarchy", "--seed", "3", "--m", "2", "--size", "32", "--steps", "20"}), 0);
  EXPECT_EQ(out_.str(), first);
}

TEST_F(CliTest, WarpCommand) {
  const Image row(1, 4, 1, std::vector<float>{0.2f, 0.4f, 0.6f, 0.8f});
  save_image(path("in.png"), row);
  const auto before = file_bytes(path("in.png"));
  ASSERT_EQ(run({"warp", "--in", path("in.png"), "--warp", R"({"type":"affine","m":[1,0,0.5,0,1,0]})", "--out",
                 path("out.png")}),
            0)
      << err_.str();
  const auto got = load_image(path("out.png"));
  EXPECT_EQ(got, decode_image(encode_image(Image(1, 4, 1, std::vector<float>{0.4f, 0.6f, 0.8f, 0.0f}))));
  EXPECT_EQ(file_bytes(path("in.png")), before);

  write_text("w.json", R"({"type":"homography","m":[1,0,0,0,1,0,0,0,1]})");
  ASSERT_EQ(run({"warp", "--in", path("in.png"), "--warp", path("w.json"), "--out", path("big.png"), "--size", "2x8"}),
            0);
  EXPECT_EQ(load_image(path("big.png")).width(), 8);
  EXPECT_EQ(run({"warp", "--in", path("in.png"), "--warp", path("w.json"), "--out", path("x.png"), "--size", "8"}), 2);
  EXPECT_EQ(run({"warp", "--in", path("missing.png"), "--warp", path("w.json"), "--out", path("x.png")}), 3);
}

TEST_F(CliTest, FilterCommand) {
  std::mt19937_64 rng(55);
  const auto g = grid_image(rng, 10, 10, 3), p = grid_image(rng, 10, 10, 3);
  save_image(path("g.png"), g);
  save_image(path("p.png"), p);
  ASSERT_EQ(run({"filter", "--guide", path("g.png"), "--input", path("p.png"), "--out", path("o.png"), "--radius", "3",
                 "--eps", "0.001"}),
            0)
      << err_.str();
  const auto want = guided_filter(g, p, FilterConfig{3, 0.001});
  const auto got = load_image(path("o.png"));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 0.5 / 255 + 1e-6);
  EXPECT_EQ(run({"filter", "--guide", path("g.png"), "--input", path("p.png"), "--out", path("o.png"), "--radius",
                 "0"}),
            2);
}
