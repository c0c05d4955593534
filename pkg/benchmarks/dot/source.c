void dot(int n, int* x, int* y, int* out) {
    *out = 0;
    for (int i = 0; i < n; i++)
        *out += x[i] * y[i];
}
