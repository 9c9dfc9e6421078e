import { defineConfig } from "vitest/config";

// The run service does not send CORS headers, so in development the page is
// served same-origin and /runs is proxied through to it.
const target = process.env.VITE_SERVE_BASE ?? "http://127.0.0.1:8765";

export default defineConfig({
  server: {
    proxy: { "/runs": target },
  },
  preview: {
    proxy: { "/runs": target },
  },
  build: {
    target: "es2021",
  },
  test: {
    environment: "node",
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
