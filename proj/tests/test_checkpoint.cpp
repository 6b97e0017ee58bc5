#include <doctest.h>

#include <filesystem>

#include "aliascope/binary_io.hpp"
#include "aliascope/nn/checkpoint.hpp"

using namespace aliascope;
using namespace aliascope::nn;

namespace {

Checkpoint small_checkpoint() {
  const Dataset data = generate_dataset({2, 8, 16, 1.0, 1});
  ModelSpec s;
  s.base_width = 2;
  s.depth = 1;
  s.n_classes = 4;
  s.input_size = 8;
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.lr_drop_epoch = 2;
  return train(FloatModel(s, 5), 5, data, c);
}

std::string error_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip keeps weights, statistics, optimizer and history") {
  Checkpoint ck = small_checkpoint();
  const auto bytes = encode_checkpoint(ck);
  Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.model.spec() == ck.model.spec());
  CHECK(back.config == ck.config);
  CHECK(back.init_seed == 5);
  CHECK(back.epoch == 2);
  CHECK(back.history == ck.history);
  CHECK(back.optimizer.step == ck.optimizer.step);
  auto pa = ck.model.parameters(), pb = back.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
  auto ba = ck.model.buffers(), bb = back.model.buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) CHECK(*ba[i].value == *bb[i].value);
  for (std::size_t i = 0; i < ck.optimizer.first_moment.size(); ++i) {
    CHECK(ck.optimizer.first_moment[i] == back.optimizer.first_moment[i]);
    CHECK(ck.optimizer.second_moment[i] == back.optimizer.second_moment[i]);
  }
  CHECK(encode_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "aliascope_unit_ck.alck";
  save_checkpoint(ck, path);
  CHECK(read_file(path) == bytes);
  CHECK(load_checkpoint(path).history == ck.history);
  std::filesystem::remove(path);
}

TEST_CASE("damaged checkpoints are rejected") {
  Checkpoint ck = small_checkpoint();
  const auto bytes = encode_checkpoint(ck);
  auto flipped = bytes;
  flipped[bytes.size() - 20] ^= 1;
  CHECK(error_of(flipped).find("checksum") != std::string::npos);
  auto magic = bytes;
  magic[1] = 'Z';
  CHECK(!error_of(magic).empty());
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 40);
  CHECK(!error_of(cut).empty());
}

}
