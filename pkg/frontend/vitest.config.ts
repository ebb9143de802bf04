import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // the integration suite boots the real HTTP service once per file
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
