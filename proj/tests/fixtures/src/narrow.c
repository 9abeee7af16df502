#include <stdio.h>

__attribute__((noinline)) unsigned char bump8(unsigned char c) { return (unsigned char)((c ^ 0xc3) + 0xca); }

__attribute__((noinline)) unsigned short bump16(unsigned short s) {
  s ^= 0xc2c3;
  s = (unsigned short)(s + 0x1cb);
  return (unsigned short)(s & 0xcfff);
}

__attribute__((noinline)) int is_magic(unsigned char c) { return c == 0xc3 || c == 0xcb; }

int main(void) {
  for (int i = 0; i < 256; i += 29)
    printf("%3d %02x %04x %d\n", i, bump8((unsigned char)i), bump16((unsigned short)(i * 257)),
           is_magic((unsigned char)(i + 0xa6)));
  return 0;
}
