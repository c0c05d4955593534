void matmul(int n, int m, int p, const int* A, const int* B, int* C) {
    for (int i = 0; i < n; i++)
        for (int j = 0; j < p; j++) {
            int acc = 0;
            for (int k = 0; k < m; k++)
                acc += A[i * m + k] * B[k * p + j];
            C[i * p + j] = acc;
        }
}
