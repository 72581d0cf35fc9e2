#include <iostream>

#include "kfstab/commands.hpp"

int main(int argc, char** argv) {
  return kfstab::cli::run(argc, argv, std::cout, std::cerr);
}
