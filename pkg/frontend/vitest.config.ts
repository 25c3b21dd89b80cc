import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // the integration test drives one real server; keep files sequential
    fileParallelism: false,
  },
});
