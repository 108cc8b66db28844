/// <reference types="vitest" />
import react from "@vitejs/plugin-react";
import { defineConfig } from "vite";

export default defineConfig({
  plugins: [react()],
  server: {
    proxy: {
      // the python service; `wheelgen serve --data-dir ... --port 8000`
      "/sessions": "http://127.0.0.1:8000",
      "/jobs": "http://127.0.0.1:8000",
      "/generations": "http://127.0.0.1:8000",
      "/images": "http://127.0.0.1:8000",
      "/keywords": "http://127.0.0.1:8000",
      "/annotation": "http://127.0.0.1:8000",
      "/health": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
    globals: true,
    setupFiles: ["tests/setup.ts"],
    testTimeout: 120000,
    hookTimeout: 120000,
  },
});
