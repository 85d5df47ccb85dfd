#include "voxflow/app/cli.hpp"

int main(int argc, char** argv) {
  voxflow::app::tune_allocator();
  return voxflow::app::run_cli(argc, argv);
}
