#include <cstdio>

int main() {
  std::puts("sc3d cli placeholder");
  return 0;
}
