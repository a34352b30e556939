#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "eegatt/error.hpp"
#include "eegatt/models.hpp"
#include "eegatt/network.hpp"
#include "eegatt/serialize.hpp"
#include "gradcheck.hpp"
#include "reference_tables.hpp"

namespace eegatt {
namespace {


TEST(Architecture, ParameterCountsMatchTables) {
  const auto rel = nn::param_count(models::build_model("relloc"));
  EXPECT_EQ(rel.total, 187046u);
  EXPECT_EQ(rel.trainable, 187038u);
  const auto att = nn::param_count(models::build_model("attloc"));
  EXPECT_EQ(att.total, 72239u);
  EXPECT_EQ(att.trainable, 72233u);
  const auto mtm = nn::param_count(models::build_model("mtm"));
  EXPECT_EQ(mtm.total, 294304u);
  EXPECT_EQ(mtm.trainable, 294298u);
}

TEST(Architecture, LayerShapesMatchTables) {
  EXPECT_EQ(testing::compare_with_table(models::build_model("relloc"), testing::relloc_table()), "");
  EXPECT_EQ(testing::compare_with_table(models::build_model("attloc"), testing::attloc_table()), "");
  EXPECT_EQ(testing::compare_with_table(models::build_model("mtm"), testing::mtm_table()), "");
}

TEST(Architecture, BundleCountEqualsSpecCount) {
  for (const char* name : {"relloc", "attloc", "mtm"}) {
    const auto spec = models::build_model(name);
    nn::Network net(spec);
    const auto a = net.params().count();
    const auto b = nn::param_count(spec);
    EXPECT_EQ(a.total, b.total) << name;
    EXPECT_EQ(a.trainable, b.trainable) << name;
  }
}

TEST(Architecture, BatchNormHasScalarPairs) {
  nn::Network net(models::build_model("attloc"));
  for (const auto& p : net.params().params) {
    if (p.name.find("_bn/") == std::string::npos) continue;
    EXPECT_EQ(p.value.size(), 1u) << p.name;
    const bool stat = p.name.ends_with("running_mean") || p.name.ends_with("running_var");
    EXPECT_EQ(p.trainable, !stat) << p.name;
  }
}

TEST(Architecture, EmbeddingVocabularyIsSix) {
  nn::Network net(models::build_model("attloc"));
  const auto* t = net.params().find("speaker_embedding/table");
  ASSERT_NE(t, nullptr);
  EXPECT_EQ(t->value.size(), 4800u);
  nn::Network mtm(models::build_model("mtm"));
  EXPECT_EQ(mtm.params().find("speaker_embedding/table")->value.size(), 1200u);
}

TEST(Architecture, RegularizedGroups) {
  nn::Network net(models::build_model("mtm"));
  for (const auto& p : net.params().params) {
    const bool weight = p.name.ends_with("/kernel");
    const bool conv = p.name.find("conv") != std::string::npos;
    const auto expected = !weight ? nn::RegGroup::kNone : (conv ? nn::RegGroup::kConv : nn::RegGroup::kDense);
    EXPECT_EQ(p.reg_group, expected) << p.name;
  }
}

TEST(Architecture, UnknownModelName) {
  try {
    models::build_model("resnet");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownModel);
  }
}

TEST(Architecture, SpatialKernelMustSpanElectrodes) {
  auto spec = models::build_model("attloc");
  for (auto& L : spec.layers) {
    if (L.kind == nn::LayerKind::kSpatialConv) L.kernel_h = 10;
  }
  EXPECT_THROW(nn::infer_shapes(spec), Error);
}

class ModelGradient : public ::testing::TestWithParam<std::tuple<std::string, int>> {};

TEST_P(ModelGradient, MatchesFiniteDifferences) {
  const auto& [name, seed] = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed) * 7919u);
  const auto spec = testing::toy_model(name, rng);
  const auto r = testing::model_gradient_check(spec, static_cast<std::uint64_t>(seed));
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.param_error, 1e-4) << name;
  EXPECT_LT(r.input_error, 1e-4) << name;
}

INSTANTIATE_TEST_SUITE_P(Toy, ModelGradient,
                         ::testing::Combine(::testing::Values("relloc", "attloc", "mtm"), ::testing::Range(1, 5)),
                         [](const auto& info) {
                           return std::get<0>(info.param) + "_" + std::to_string(std::get<1>(info.param));
                         });

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(3);
  const auto spec = testing::toy_model("mtm", rng);
  nn::Network net(spec);
  net.initialize(3);
  std::vector<Tensor> inputs;
  for (auto li : net.input_layers()) {
    const auto& L = spec.layers[li];
    if (L.index_input) {
      inputs.push_back(Tensor({2, 1}, 2.0));
    } else {
      inputs.push_back(testing::random_tensor(testing::with_batch(2, L.shape), rng));
    }
  }
  const auto cache = net.forward(inputs, nn::Mode::kTrain, 5);
  const auto g = net.backward(cache, {Tensor(), Tensor()});
  for (const auto& t : g.params) {
    for (double v : t.storage()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Forward, InferIsDeterministicAndTrainDropoutSeeded) {
  Rng rng(11);
  const auto spec = testing::toy_model("attloc", rng);
  nn::Network net(spec);
  net.initialize(11);
  std::vector<Tensor> inputs = {testing::random_tensor(testing::with_batch(4, spec.layers[0].shape), rng),
                                Tensor({4, 1}, 1.0)};
  const auto head = net.head_layer("attended");
  const auto a = net.forward(inputs, nn::Mode::kInfer).activations[head];
  const auto b = net.forward(inputs, nn::Mode::kInfer).activations[head];
  EXPECT_EQ(a.storage(), b.storage());
  const auto c = net.forward(inputs, nn::Mode::kTrain, 9).activations[head];
  const auto d = net.forward(inputs, nn::Mode::kTrain, 9).activations[head];
  EXPECT_EQ(c.storage(), d.storage());
}

TEST(Forward, EmbeddingIndexOutOfRange) {
  Rng rng(12);
  const auto spec = testing::toy_model("attloc", rng);
  nn::Network net(spec);
  net.initialize(1);
  std::vector<Tensor> inputs = {testing::random_tensor(testing::with_batch(1, spec.layers[0].shape), rng),
                                Tensor({1, 1}, 6.0)};
  EXPECT_THROW(net.forward(inputs, nn::Mode::kInfer), Error);
}

TEST(Initialize, SameSeedSameParameters) {
  nn::Network a(models::build_model("attloc"));
  nn::Network b(models::build_model("attloc"));
  a.initialize(21);
  b.initialize(21);
  for (std::size_t i = 0; i < a.params().params.size(); ++i) {
    EXPECT_EQ(a.params().params[i].value.storage(), b.params().params[i].value.storage());
  }
  b.initialize(22);
  EXPECT_NE(a.params().find("spatial_conv/kernel")->value.storage(),
            b.params().find("spatial_conv/kernel")->value.storage());
}

TEST(Initialize, EmbeddingWithinRange) {
  nn::Network net(models::build_model("mtm"));
  net.initialize(4);
  for (double v : net.params().find("speaker_embedding/table")->value.storage()) {
    EXPECT_LE(std::abs(v), 0.05);
  }
}

TEST(Serialize, SpecJsonRoundTrip) {
  for (const char* name : {"relloc", "attloc", "mtm"}) {
    const auto spec = models::build_model(name);
    EXPECT_EQ(nn::spec_from_json(nn::spec_to_json(spec), "test"), spec) << name;
  }
}

TEST(Serialize, ParamsRoundTripBitExact) {
  nn::Network net(models::build_model("attloc"));
  net.initialize(8);
  const auto bytes = nn::encode_params(net.params());
  const auto back = nn::decode_params(bytes, "memory");
  ASSERT_EQ(back.params.size(), net.params().params.size());
  for (std::size_t i = 0; i < back.params.size(); ++i) {
    EXPECT_EQ(back.params[i].name, net.params().params[i].name);
    EXPECT_EQ(back.params[i].value.shape(), net.params().params[i].value.shape());
    EXPECT_EQ(back.params[i].value.storage(), net.params().params[i].value.storage());
  }
}

TEST(Serialize, CorruptContainerIsFormatError) {
  nn::Network net(models::build_model("attloc"));
  net.initialize(8);
  auto bytes = nn::encode_params(net.params());
  for (auto cut : {std::size_t{0}, std::size_t{3}, bytes.size() / 2}) {
    try {
      nn::decode_params(bytes.substr(0, cut), "cut");
      FAIL() << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kFormat);
    }
  }
  bytes[0] ^= 0x5a;
  EXPECT_THROW(nn::decode_params(bytes, "magic"), Error);
}

TEST(Serialize, AssignRejectsShapeMismatch) {
  nn::Network a(models::build_model("attloc"));
  nn::Network b(models::build_model("relloc"));
  a.initialize(1);
  EXPECT_THROW(nn::assign_params(b, a.params(), "other"), Error);
}

TEST(Serialize, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "eegatt_net_test";
  std::filesystem::create_directories(dir);
  nn::Network a(models::build_model("mtm"));
  a.initialize(5);
  nn::save_params(a.params(), dir / "m.params");
  nn::Network b(models::build_model("mtm"));
  nn::load_params(b, dir / "m.params");
  EXPECT_EQ(a.params().find("attended_dense/kernel")->value.storage(),
            b.params().find("attended_dense/kernel")->value.storage());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace eegatt
