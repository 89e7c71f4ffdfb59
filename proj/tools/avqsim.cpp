// avqsim command-line driver: run / plotdata / audit-pools.

#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::puts("avqsim: not wired up yet");
  return 1;
}
