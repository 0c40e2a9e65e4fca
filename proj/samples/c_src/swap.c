#include <stdio.h>

/* Swap two values */
void swapValues(int *x, int *y) {
  int temp;
  temp = *x;
  *x = *y;
  *y = temp;
}

int main(void) {
  int a = 1, b = 2;
  // Callers rely on the swap happening in place, so pass addresses.
  swapValues(&a, &b);
  printf("%d %d\n", a, b);
  return 0;
}
