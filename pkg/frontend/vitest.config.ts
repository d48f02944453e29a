import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 60_000,
    hookTimeout: 60_000,
    // The e2e suite owns a single service process and session; keep files
    // sequential so stub-transcript consumption stays deterministic.
    fileParallelism: false,
  },
});
