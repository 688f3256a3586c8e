import { defineConfig } from "vitest/config";

// base "./" so the bundle works when mounted under /ui by the API server
export default defineConfig({
  base: "./",
  build: {
    outDir: "dist",
    target: "es2021",
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
  },
});
